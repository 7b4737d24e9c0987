use proptest::prelude::*;
use transducer_core::decide::{choose, decision_threshold, TieRule, UtilityMatrix};
use transducer_core::evaluate::{
    accumulate_confusion, achievable_bounds, grid_posteriors, prob_superior, rescaled_yield, utility_yield, GridAxis,
    OutputGrid,
};
use transducer_core::model::{ClassProbabilityVector, ConditionalMode, FrequencySample, MixtureComponent};
use transducer_core::{PrevalenceVector, TransducerModel};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn component(c: usize, d: usize) -> impl Strategy<Value = MixtureComponent> {
    (
        0.05f64..1.0,
        simplex(c),
        prop::collection::vec(-3.0f64..3.0, d),
        prop::collection::vec(0.2f64..2.0, d),
    )
        .prop_map(|(w, a, m, s)| MixtureComponent::new(w, a, m, s))
}

fn sample(k: usize, c: usize, d: usize) -> impl Strategy<Value = FrequencySample> {
    prop::collection::vec(component(c, d), k).prop_map(|mut comps| {
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        for comp in &mut comps {
            comp.weight /= total;
        }
        FrequencySample::new(comps)
    })
}

/// Random models with 1-4 samples of 1-4 components, 2-4 classes and 1-2
/// output dimensions.
fn model() -> impl Strategy<Value = TransducerModel> {
    (1usize..=4, 1usize..=4, 2usize..=4, 1usize..=2).prop_flat_map(|(t, k, c, d)| {
        prop::collection::vec(sample(k, c, d), t).prop_map(move |samples| TransducerModel::new(samples, c, d).unwrap())
    })
}

fn model_and_point() -> impl Strategy<Value = (TransducerModel, Vec<f64>)> {
    model().prop_flat_map(|m| {
        let d = m.y_dim();
        (Just(m), prop::collection::vec(-5.0f64..5.0, d))
    })
}

fn utility(n_dec: usize, n_cls: usize) -> impl Strategy<Value = UtilityMatrix> {
    prop::collection::vec(-10.0f64..10.0, n_dec * n_cls)
        .prop_map(move |e| UtilityMatrix::from_row_major(n_dec, n_cls, e).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conditionals_are_normalized((m, y) in model_and_point()) {
        for mode in [ConditionalMode::Exchangeable, ConditionalMode::NonExchangeable] {
            let p = m.class_probabilities(&y, mode, None).unwrap();
            let s: f64 = p.as_slice().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!(p.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn bayes_identity((m, y) in model_and_point()) {
        let p = m.conditional_class_given_output(&y).unwrap();
        let py = m.marginal_output(&y).unwrap();
        for c in 0..m.n_classes() {
            let lhs = p[c] * py;
            let rhs = m.conditional_output_given_class(c, &y).unwrap() * m.marginal_class(c).unwrap();
            prop_assert!(rel(lhs, rhs) < 1e-12 || (lhs - rhs).abs() < 1e-300);
            let joint = m.joint_density(c, &y).unwrap();
            prop_assert!(rel(joint, lhs) < 1e-12 || (joint - lhs).abs() < 1e-300);
        }
    }

    #[test]
    fn reweighting_with_own_marginal_is_identity((m, y) in model_and_point()) {
        let r = PrevalenceVector::from_weights(m.class_marginal()).unwrap();
        let a = m.reweight_with_prevalence(&y, &r).unwrap();
        let b = m.conditional_class_given_output(&y).unwrap();
        for c in 0..m.n_classes() {
            prop_assert!((a[c] - b[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn reweighting_follows_bayes_with_base_rates((m, y) in model_and_point(), w in simplex(4)) {
        let c_n = m.n_classes();
        let r = PrevalenceVector::from_weights(&w[..c_n]).unwrap();
        let p = m.reweight_with_prevalence(&y, &r).unwrap();
        let scores: Vec<f64> = (0..c_n)
            .map(|c| m.conditional_output_given_class(c, &y).unwrap() * r.as_slice()[c])
            .collect();
        let total: f64 = scores.iter().sum();
        if total > 1e-250 {
            for c in 0..c_n {
                prop_assert!((p[c] - scores[c] / total).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_sample_modes_agree((m, y) in model_and_point()) {
        let one = TransducerModel::new(vec![m.samples()[0].clone()], m.n_classes(), m.y_dim()).unwrap();
        let a = one.class_probabilities(&y, ConditionalMode::Exchangeable, None).unwrap();
        let b = one.class_probabilities(&y, ConditionalMode::NonExchangeable, None).unwrap();
        for c in 0..m.n_classes() {
            prop_assert!((a[c] - b[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_transforms_keep_decisions(
        u in utility(3, 2),
        p1 in 0.0f64..1.0,
        scale in 0.01f64..100.0,
        shift in -50.0f64..50.0,
    ) {
        let p = ClassProbabilityVector::new(vec![1.0 - p1, p1]).unwrap();
        let a = choose(&u, &p, TieRule::ReportTie).unwrap();
        let b = choose(&u.affine(scale, shift).unwrap(), &p, TieRule::ReportTie).unwrap();
        prop_assert_eq!(a.tied, b.tied);
    }

    #[test]
    fn rescaled_yield_is_affine_invariant(
        u in utility(2, 2),
        counts in prop::collection::vec(0u32..50, 4),
        scale in 0.01f64..100.0,
        shift in -50.0f64..50.0,
    ) {
        let rows = vec![
            vec![counts[0] as f64, counts[1] as f64 + 1.0],
            vec![counts[2] as f64 + 1.0, counts[3] as f64],
        ];
        let cm = transducer_core::evaluate::ConfusionMatrix::from_rows(&rows).unwrap();
        let totals = cm.class_totals();
        let v = achievable_bounds(&u, &totals)
            .and_then(|b| rescaled_yield(utility_yield(&u, &cm).unwrap(), b));
        let w = u.affine(scale, shift).unwrap();
        let vw = achievable_bounds(&w, &totals)
            .and_then(|b| rescaled_yield(utility_yield(&w, &cm).unwrap(), b));
        match (v, vw) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn optimal_policy_dominates_fixed_policies(
        m in model().prop_filter("one output dimension", |m| m.y_dim() == 1),
        u_entries in prop::collection::vec(-5.0f64..5.0, 8),
        seeds in prop::collection::vec(any::<u64>(), 5),
    ) {
        let c_n = m.n_classes();
        let u = UtilityMatrix::from_row_major(2, c_n, u_entries[..2 * c_n].to_vec()).unwrap();
        let grid = OutputGrid::new(vec![GridAxis { lo: -12.0, hi: 12.0, cells: 400 }]).unwrap();
        let eval = grid_posteriors(&m, &grid).unwrap();
        let best = eval.optimal_utility(&u).unwrap();
        for s in seeds {
            let policy: Vec<usize> = (0..grid.n_cells())
                .map(|i| ((s.rotate_left(i as u32 % 64) ^ i as u64) & 1) as usize)
                .collect();
            prop_assert!(eval.policy_utility(&u, &policy).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn superiority_mirror_sums_to_one(
        a in prop::collection::vec(-3.0f64..3.0, 1..60),
        b in prop::collection::vec(-3.0f64..3.0, 1..60),
        shared in prop::collection::vec(-1.0f64..1.0, 0..10),
    ) {
        let mut a = a;
        let mut b = b;
        a.extend(&shared);
        b.extend(&shared);
        let ab = prob_superior(&a, &b).unwrap();
        let ba = prob_superior(&b, &a).unwrap();
        prop_assert_eq!(ab + ba, 1.0);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn confusion_total_counts_every_record(
        decisions in prop::collection::vec(prop::sample::select(vec![vec![0usize], vec![1], vec![0, 1]]), 1..100),
        truths_seed in any::<u64>(),
    ) {
        let truths: Vec<usize> = (0..decisions.len()).map(|i| ((truths_seed >> (i % 64)) & 1) as usize).collect();
        let cm = accumulate_confusion(&decisions, &truths, 2, 2).unwrap();
        prop_assert_eq!(cm.total(), decisions.len() as f64);
        let ones = truths.iter().filter(|&&t| t == 1).count() as f64;
        prop_assert_eq!(cm.class_totals(), vec![decisions.len() as f64 - ones, ones]);
    }

    #[test]
    fn binary_threshold_separates_decisions(u in utility(2, 2), p1 in 0.0f64..1.0) {
        use transducer_core::decide::Threshold;
        let p = ClassProbabilityVector::new(vec![1.0 - p1, p1]).unwrap();
        let out = choose(&u, &p, TieRule::ReportTie).unwrap();
        let eu = &out.expected_utilities;
        // away from the threshold the strict preference must match it
        if (eu[1] - eu[0]).abs() > 1e-9 {
            let prefers_one = eu[1] > eu[0];
            match decision_threshold(&u).unwrap() {
                Threshold::At(t) => prop_assert_eq!(prefers_one, p1 > t),
                Threshold::Below(t) => prop_assert_eq!(prefers_one, p1 < t),
                Threshold::Never => prop_assert!(!prefers_one),
                Threshold::Always => prop_assert!(prefers_one),
                Threshold::Indifferent => prop_assert!(false),
            }
        }
    }
}
