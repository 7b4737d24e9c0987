use transducer_core::calibrate::{fit, PreparedFit, SamplerConfig};
use transducer_core::decide::UtilityMatrix;
use transducer_core::evaluate::{algorithm_expected_utility, GridAxis, OutputGrid};
use transducer_core::model::MixtureComponent;
use transducer_core::oracle::{grid_bayes, synth_generate, synth_generate_with_prevalence, GeneratorSpec};
use transducer_core::{CalibrationRecord, CalibrationSet, PrevalenceVector};

fn generator(seed: u64) -> GeneratorSpec {
    GeneratorSpec::new(
        vec![
            MixtureComponent::new(0.5, vec![0.8, 0.2], vec![-1.5], vec![1.0]),
            MixtureComponent::new(0.3, vec![0.2, 0.8], vec![1.5], vec![1.0]),
            MixtureComponent::new(0.2, vec![0.5, 0.5], vec![0.5], vec![0.4]),
        ],
        seed,
    )
    .unwrap()
}

fn small_config(seed: u64) -> SamplerConfig {
    SamplerConfig {
        components: 6,
        samples: 64,
        chains: 2,
        burn_in: 50,
        thinning: 2,
        ..SamplerConfig::with_seed(seed)
    }
}

#[test]
fn generated_labels_follow_the_oracle_conditional() {
    let spec = generator(3);
    let data = synth_generate(&spec, 1_000_000).unwrap();
    let bins = 40;
    let (lo, hi) = (-4.0, 4.0);
    let mut count = vec![0usize; bins];
    let mut ones = vec![0.0; bins];
    let mut expected = vec![0.0; bins];
    for r in data.records() {
        let y = r.output[0];
        if !(lo..hi).contains(&y) {
            continue;
        }
        let b = ((y - lo) / (hi - lo) * bins as f64) as usize;
        count[b] += 1;
        ones[b] += r.class_label as f64;
        expected[b] += spec.conditional(&r.output)[1];
    }
    let mut checked = 0;
    for b in 0..bins {
        if count[b] >= 1000 {
            let n = count[b] as f64;
            let diff = (ones[b] / n - expected[b] / n).abs();
            assert!(diff < 0.02, "bin {b}: n={n} diff={diff}");
            checked += 1;
        }
    }
    assert!(checked >= 25, "{checked}");
}

#[test]
fn verbatim_model_reproduces_the_oracle() {
    let spec = generator(0);
    let model = spec.to_model().unwrap();
    let points: Vec<Vec<f64>> = (0..=400).map(|i| vec![-8.0 + 0.04 * i as f64]).collect();
    let truth = grid_bayes(&spec, &points).unwrap();
    for (y, t) in points.iter().zip(&truth) {
        let p = model.conditional_class_given_output(y).unwrap();
        for c in 0..2 {
            assert!((p[c] - t[c]).abs() < 1e-10, "y={y:?}");
        }
        assert!((model.marginal_output(y).unwrap() - spec.output_density(y)).abs() < 1e-12);
    }
}

#[test]
fn shifted_prevalence_keeps_class_conditionals() {
    let spec = generator(5);
    let r = PrevalenceVector::from_weights(&[0.25, 0.75]).unwrap();
    let data = synth_generate_with_prevalence(&spec, &r, 200_000).unwrap();
    let ones = data.records().iter().filter(|r| r.class_label == 1).count() as f64 / data.len() as f64;
    assert!((ones - 0.75).abs() < 0.005, "{ones}");
    // the mean output of class 1 must match the generator's p(y | c=1)
    let model = spec.to_model().unwrap();
    let pc1 = model.marginal_class(1).unwrap();
    let true_mean: f64 = spec
        .components()
        .iter()
        .map(|k| k.weight * k.class_params[1] * k.means[0])
        .sum::<f64>()
        / pc1;
    let (s, n) = data
        .records()
        .iter()
        .filter(|r| r.class_label == 1)
        .fold((0.0, 0.0), |(s, n), r| (s + r.output[0], n + 1.0));
    assert!((s / n - true_mean).abs() < 0.01, "{} vs {true_mean}", s / n);
}

#[test]
fn grid_refinement_converges() {
    let model = generator(0).to_model().unwrap();
    let u = UtilityMatrix::from_rows(&[vec![1.0, -10.0], vec![0.0, 10.0]]).unwrap();
    let grid = OutputGrid::new(vec![GridAxis {
        lo: -8.0,
        hi: 8.0,
        cells: 512,
    }])
    .unwrap();
    let coarse = algorithm_expected_utility(&model, &u, &grid).unwrap();
    let fine = algorithm_expected_utility(&model, &u, &grid.refined(10)).unwrap();
    assert!((coarse - fine).abs() < 1e-3, "{coarse} vs {fine}");
}

#[test]
fn fit_is_deterministic_and_exchangeable() {
    let data = synth_generate(&generator(9), 150).unwrap();
    let config = small_config(21);
    let a = fit(&data, &config).unwrap();
    assert_eq!(a, fit(&data, &config).unwrap());

    // reversing the records while carrying their keys leaves the fit unchanged
    let n = data.len();
    let reversed: Vec<CalibrationRecord> = data.records().iter().rev().cloned().collect();
    let keys: Vec<u64> = (0..n as u64).rev().collect();
    let reversed = CalibrationSet::new(reversed, 2, 1).unwrap();
    let prepared = PreparedFit::with_record_keys(&reversed, &keys, &config).unwrap();
    let outputs = (0..config.chains).map(|c| prepared.run_chain(c)).collect();
    let b = prepared.assemble(outputs).unwrap().model;
    assert_eq!(a.samples(), b.samples());

    let c = fit(&data, &small_config(22)).unwrap();
    assert_ne!(a.samples(), c.samples());
}

#[test]
fn single_component_posterior_is_conjugate() {
    let records: Vec<CalibrationRecord> = (0..300)
        .map(|i| CalibrationRecord::new(usize::from(i % 10 < 3), vec![(i as f64 * 0.37).sin()]))
        .collect();
    let data = CalibrationSet::new(records, 2, 1).unwrap();
    let config = SamplerConfig {
        components: 1,
        samples: 2000,
        chains: 2,
        burn_in: 10,
        thinning: 1,
        ..SamplerConfig::with_seed(4)
    };
    let model = fit(&data, &config).unwrap();
    let mean: f64 = model
        .samples()
        .iter()
        .map(|s| s.components[0].class_params[1])
        .sum::<f64>()
        / model.n_samples() as f64;
    // Beta(1 + 90, 1 + 210)
    let expected = 91.0 / 302.0;
    assert!((mean - expected).abs() < 0.01, "{mean} vs {expected}");
}
