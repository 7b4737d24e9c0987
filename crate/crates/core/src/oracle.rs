//! Known-generator ground truth: synthetic calibration sets drawn from an
//! exact Gaussian mixture, and the brute-force Bayes conditional of that
//! mixture on a grid of outputs.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{CalibrationRecord, CalibrationSet};
use crate::error::{Error, Result};
use crate::math;
use crate::model::{FrequencySample, MixtureComponent, PrevalenceVector, TransducerModel};

/// Records drawn from one RNG stream; blocks are independent so a large
/// set can be generated block by block in any order.
pub const BLOCK_SIZE: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    components: Vec<MixtureComponent>,
    n_classes: usize,
    y_dim: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(components: Vec<MixtureComponent>, seed: u64) -> Result<Self> {
        let first = components.first().ok_or(Error::EmptyData)?;
        let n_classes = first.class_params.len();
        let y_dim = first.means.len();
        let mut total = 0.0;
        for comp in &components {
            comp.validate(n_classes, y_dim)?;
            total += comp.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProbability("generator weights must sum to 1"));
        }
        Ok(Self {
            components,
            n_classes,
            y_dim,
            seed,
        })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// p(c) of the generator.
    pub fn class_marginal(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for comp in &self.components {
            for (pc, a) in p.iter_mut().zip(&comp.class_params) {
                *pc += comp.weight * a;
            }
        }
        p
    }

    /// A single-sample model holding the generator verbatim.
    pub fn to_model(&self) -> Result<TransducerModel> {
        TransducerModel::new(
            vec![FrequencySample::new(self.components.clone())],
            self.n_classes,
            self.y_dim,
        )
    }

    /// Σ_d ln N(y_d | μ_kd, σ_kd) for every component.
    fn ln_kernels(&self, y: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|comp| {
                y.iter()
                    .zip(comp.means.iter().zip(&comp.sds))
                    .map(|(&v, (&mu, &sd))| {
                        let z = (v - mu) / sd;
                        -0.5 * z * z - math::ln(sd) - 0.5 * math::ln(2.0 * core::f64::consts::PI)
                    })
                    .sum()
            })
            .collect()
    }

    /// Joint densities p(c, y) for every class, scaled by a common factor
    /// exp(-shift) to avoid underflow; returns (scaled joints, shift).
    fn scaled_joint(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let ln_k = self.ln_kernels(y);
        let shift = ln_k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut joint = vec![0.0; self.n_classes];
        for (comp, &lk) in self.components.iter().zip(&ln_k) {
            let b = math::exp(lk - shift);
            for (j, a) in joint.iter_mut().zip(&comp.class_params) {
                *j += comp.weight * a * b;
            }
        }
        (joint, shift)
    }

    /// p(y) of the generator.
    pub fn output_density(&self, y: &[f64]) -> f64 {
        let (joint, shift) = self.scaled_joint(y);
        joint.iter().sum::<f64>() * math::exp(shift)
    }

    /// p(c | y) of the generator at one point.
    pub fn conditional(&self, y: &[f64]) -> Vec<f64> {
        let (joint, _) = self.scaled_joint(y);
        let total: f64 = joint.iter().sum();
        joint.iter().map(|j| j / total).collect()
    }

    /// p(c | y) when the classes occur with prevalences `r` instead.
    pub fn conditional_at_prevalence(&self, y: &[f64], r: &PrevalenceVector) -> Vec<f64> {
        let (joint, _) = self.scaled_joint(y);
        let marginal = self.class_marginal();
        let w: Vec<f64> = joint
            .iter()
            .zip(&marginal)
            .zip(r.as_slice())
            .map(|((j, m), rc)| if *m > 0.0 { rc * j / m } else { 0.0 })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|v| v / total).collect()
    }

    /// Equal-tailed interval holding `mass` of the output distribution in
    /// dimension `j`, found by bisection on the mixture CDF.
    pub fn central_interval(&self, j: usize, mass: f64) -> (f64, f64) {
        let cdf = |x: f64| -> f64 {
            self.components
                .iter()
                .map(|c| c.weight * normal_cdf((x - c.means[j]) / c.sds[j]))
                .sum()
        };
        let lo_all = self
            .components
            .iter()
            .map(|c| c.means[j] - 12.0 * c.sds[j])
            .fold(f64::INFINITY, f64::min);
        let hi_all = self
            .components
            .iter()
            .map(|c| c.means[j] + 12.0 * c.sds[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let invert = |target: f64| {
            let (mut a, mut b) = (lo_all, hi_all);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if cdf(m) < target {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let tail = 0.5 * (1.0 - mass);
        (invert(tail), invert(1.0 - tail))
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

fn pick<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // rounding left u just past the end: last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

fn draw_output<R: Rng>(rng: &mut R, comp: &MixtureComponent) -> Vec<f64> {
    comp.means
        .iter()
        .zip(&comp.sds)
        .map(|(&mu, &sd)| {
            let z: f64 = StandardNormal.sample(rng);
            mu + sd * z
        })
        .collect()
}

/// Records of block `block` (at most BLOCK_SIZE) from the generator.
pub fn synth_block(spec: &GeneratorSpec, block: usize, len: usize) -> Vec<CalibrationRecord> {
    let mut rng = block_rng(spec.seed, block);
    let weights: Vec<f64> = spec.components.iter().map(|c| c.weight).collect();
    (0..len)
        .map(|_| {
            let comp = &spec.components[pick(&mut rng, &weights)];
            let class = pick(&mut rng, &comp.class_params);
            CalibrationRecord::new(class, draw_output(&mut rng, comp))
        })
        .collect()
}

fn block_lengths(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n.div_ceil(BLOCK_SIZE)).map(move |b| (b, BLOCK_SIZE.min(n - b * BLOCK_SIZE)))
}

/// `n` i.i.d. records: component by weight, class by the component's class
/// probabilities, output from the component's Gaussian.
pub fn synth_generate(spec: &GeneratorSpec, n: usize) -> Result<CalibrationSet> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let records = block_lengths(n)
        .flat_map(|(b, len)| synth_block(spec, b, len))
        .collect();
    CalibrationSet::new(records, spec.n_classes, spec.y_dim)
}

/// Records of block `block` with class prevalences `r`, keeping each
/// class's output distribution p(y | c) of the generator.
pub fn synth_block_with_prevalence(
    spec: &GeneratorSpec,
    r: &PrevalenceVector,
    block: usize,
    len: usize,
) -> Vec<CalibrationRecord> {
    let mut rng = block_rng(spec.seed, block);
    let per_class: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|c| spec.components.iter().map(|k| k.weight * k.class_params[c]).collect())
        .collect();
    (0..len)
        .map(|_| {
            let class = pick(&mut rng, r.as_slice());
            let comp = &spec.components[pick(&mut rng, &per_class[class])];
            CalibrationRecord::new(class, draw_output(&mut rng, comp))
        })
        .collect()
}

/// `n` records drawn with class prevalences `r`: class first, then a
/// component given the class, then the output.
pub fn synth_generate_with_prevalence(spec: &GeneratorSpec, r: &PrevalenceVector, n: usize) -> Result<CalibrationSet> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if r.as_slice().len() != spec.n_classes {
        return Err(Error::DimensionMismatch {
            expected: spec.n_classes,
            found: r.as_slice().len(),
        });
    }
    let marginal = spec.class_marginal();
    if r.as_slice().iter().zip(&marginal).any(|(rc, m)| *rc > 0.0 && *m <= 0.0) {
        return Err(Error::UndefinedConditional(
            "generator has no mass for a requested class",
        ));
    }
    let records = block_lengths(n)
        .flat_map(|(b, len)| synth_block_with_prevalence(spec, r, b, len))
        .collect();
    CalibrationSet::new(records, spec.n_classes, spec.y_dim)
}

/// Exact p(c | y) of the generator at each grid point.
pub fn grid_bayes(spec: &GeneratorSpec, y_grid: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    y_grid
        .iter()
        .map(|y| {
            if y.len() != spec.y_dim {
                return Err(Error::DimensionMismatch {
                    expected: spec.y_dim,
                    found: y.len(),
                });
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
            Ok(spec.conditional(y))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_component(seed: u64) -> GeneratorSpec {
        GeneratorSpec::new(
            vec![
                MixtureComponent::new(0.7, vec![0.9, 0.1], vec![-2.0], vec![1.0]),
                MixtureComponent::new(0.3, vec![0.1, 0.9], vec![2.0], vec![1.0]),
            ],
            seed,
        )
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(GeneratorSpec::new(vec![], 1).is_err());
        let c = MixtureComponent::new(0.5, vec![0.5, 0.5], vec![0.0], vec![1.0]);
        assert!(GeneratorSpec::new(vec![c], 1).is_err());
    }

    #[test]
    fn degenerate_class_probabilities() {
        let spec = GeneratorSpec::new(
            vec![
                MixtureComponent::new(0.4, vec![1.0, 0.0], vec![0.0], vec![1.0]),
                MixtureComponent::new(0.6, vec![1.0, 0.0], vec![3.0], vec![0.5]),
            ],
            3,
        )
        .unwrap();
        let data = synth_generate(&spec, 500).unwrap();
        assert!(data.records().iter().all(|r| r.class_label == 0));
    }

    #[test]
    fn deterministic_and_block_consistent() {
        let spec = two_component(11);
        let a = synth_generate(&spec, 5000).unwrap();
        let b = synth_generate(&spec, 5000).unwrap();
        assert_eq!(a, b);
        // a shorter set is a prefix of a longer one
        let short = synth_generate(&spec, 100).unwrap();
        assert_eq!(short.records(), &a.records()[..100]);
        let other = synth_generate(&spec.with_seed(12), 100).unwrap();
        assert_ne!(other.records(), short.records());
    }

    #[test]
    fn class_frequency_within_clt_bound() {
        let spec = two_component(5);
        let n = 20_000;
        let data = synth_generate(&spec, n).unwrap();
        let freq = data.empirical_class_freq();
        let marginal = spec.class_marginal();
        for c in 0..2 {
            assert!((freq[c] - marginal[c]).abs() < 3.0 / math::sqrt(n as f64));
        }
    }

    #[test]
    fn prevalence_generation() {
        let spec = two_component(8);
        let r = PrevalenceVector::new(vec![0.25, 0.75]).unwrap();
        let n = 20_000;
        let data = synth_generate_with_prevalence(&spec, &r, n).unwrap();
        let freq = data.empirical_class_freq();
        assert!((freq[1] - 0.75).abs() < 3.0 / math::sqrt(n as f64));
    }

    #[test]
    fn single_component_gives_constant_curve() {
        let spec = GeneratorSpec::new(
            vec![MixtureComponent::new(1.0, vec![0.3, 0.7], vec![0.0], vec![1.0])],
            0,
        )
        .unwrap();
        let grid: Vec<Vec<f64>> = (-20..=20).map(|i| vec![i as f64]).collect();
        for p in grid_bayes(&spec, &grid).unwrap() {
            assert!((p[0] - 0.3).abs() < 1e-12 && (p[1] - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_spec_is_half_at_midpoint() {
        let spec = GeneratorSpec::new(
            vec![
                MixtureComponent::new(0.5, vec![0.8, 0.2], vec![-1.5], vec![0.7]),
                MixtureComponent::new(0.5, vec![0.2, 0.8], vec![1.5], vec![0.7]),
            ],
            0,
        )
        .unwrap();
        let p = grid_bayes(&spec, &[vec![0.0]]).unwrap();
        assert!((p[0][1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn verbatim_model_agrees() {
        let spec = two_component(0);
        let model = spec.to_model().unwrap();
        for i in -60..=60 {
            let y = [i as f64 * 0.25];
            let a = spec.conditional(&y);
            let b = model.conditional_class_given_output(&y).unwrap();
            for c in 0..2 {
                assert!((a[c] - b[c]).abs() < 1e-10, "{y:?}");
            }
        }
    }

    #[test]
    fn central_interval_mass() {
        let spec = two_component(0);
        let (lo, hi) = spec.central_interval(0, 0.95);
        let cdf = |x: f64| -> f64 {
            spec.components()
                .iter()
                .map(|c| c.weight * normal_cdf((x - c.means[0]) / c.sds[0]))
                .sum()
        };
        assert!((cdf(hi) - cdf(lo) - 0.95).abs() < 1e-9);
        assert!((cdf(lo) - 0.025).abs() < 1e-9);
    }

    #[test]
    fn grid_bayes_rejects_bad_points() {
        let spec = two_component(0);
        assert!(grid_bayes(&spec, &[vec![0.0, 1.0]]).is_err());
        assert!(grid_bayes(&spec, &[vec![f64::NAN]]).is_err());
    }
}
