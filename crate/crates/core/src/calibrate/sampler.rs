use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use super::{ln_or_neg_inf, PreparedFit, Priors};
use crate::math::{self, HALF_LN_2PI};
use crate::model::{FrequencySample, MixtureComponent};

/// Sweep index used for the per-record draws of the initial assignment.
const INIT_SWEEP: u64 = u64::MAX;

/// Per-component sufficient statistics of the assigned records.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    pub counts: Vec<usize>,
    /// `K·C`, component-major.
    pub class_counts: Vec<usize>,
    /// `K·d` sums of outputs.
    pub sums: Vec<f64>,
    /// `K·d` sums of squared deviations from the component mean.
    pub centered_ss: Vec<f64>,
}

impl SuffStats {
    /// Recomputes the statistics from assignments, visiting records in
    /// sampler order.
    pub fn compute(fit: &PreparedFit, assignments: &[usize], k: usize) -> Self {
        let c_n = fit.n_classes();
        let d = fit.y_dim();
        let mut s = SuffStats {
            counts: vec![0; k],
            class_counts: vec![0; k * c_n],
            sums: vec![0.0; k * d],
            centered_ss: vec![0.0; k * d],
        };
        for (i, &z) in assignments.iter().enumerate() {
            s.counts[z] += 1;
            s.class_counts[z * c_n + fit.classes[i]] += 1;
            for (j, &y) in fit.output(i).iter().enumerate() {
                s.sums[z * d + j] += y;
            }
        }
        for (i, &z) in assignments.iter().enumerate() {
            let n = s.counts[z] as f64;
            for (j, &y) in fit.output(i).iter().enumerate() {
                let dev = y - s.sums[z * d + j] / n;
                s.centered_ss[z * d + j] += dev * dev;
            }
        }
        s
    }
}

/// State of one Gibbs chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    weights: Vec<f64>,
    /// `K·C`
    alpha: Vec<f64>,
    /// `K·d`
    means: Vec<f64>,
    /// `K·d`
    sds: Vec<f64>,
    assignments: Vec<usize>,
    stats: SuffStats,
    rng: ChaCha8Rng,
    record_seed: u64,
    sweep: u64,
}

impl ChainState {
    /// Uniformly random assignments followed by a parameter draw from
    /// their full conditionals.
    pub fn init(fit: &PreparedFit, chain: usize) -> Self {
        let k = fit.config.components;
        let mut rng = ChaCha8Rng::seed_from_u64(fit.config.seed);
        rng.set_stream(chain as u64);
        let record_seed = splitmix64(fit.config.seed ^ splitmix64(chain as u64 + 1));
        let assignments: Vec<usize> = fit
            .keys
            .iter()
            .map(|&key| {
                let u = record_uniform(record_seed, key, INIT_SWEEP);
                ((u * k as f64) as usize).min(k - 1)
            })
            .collect();
        let stats = SuffStats::compute(fit, &assignments, k);
        let mut state = ChainState {
            weights: vec![0.0; k],
            alpha: vec![0.0; k * fit.n_classes()],
            means: vec![0.0; k * fit.y_dim()],
            sds: vec![1.0; k * fit.y_dim()],
            assignments,
            stats,
            rng,
            record_seed,
            sweep: 0,
        };
        state.update_parameters(&fit.priors);
        state
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn stats(&self) -> &SuffStats {
        &self.stats
    }

    pub fn sweep(&self) -> u64 {
        self.sweep
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    /// Whether the stored statistics equal a fresh recomputation.
    pub fn stats_consistent(&self, fit: &PreparedFit) -> bool {
        self.stats == SuffStats::compute(fit, &self.assignments, self.n_components())
    }

    pub fn frequency_sample(&self) -> FrequencySample {
        let k = self.n_components();
        let c = self.alpha.len() / k;
        let d = self.means.len() / k;
        FrequencySample::new(
            (0..k)
                .map(|j| {
                    MixtureComponent::new(
                        self.weights[j],
                        self.alpha[j * c..(j + 1) * c].to_vec(),
                        self.means[j * d..(j + 1) * d].to_vec(),
                        self.sds[j * d..(j + 1) * d].to_vec(),
                    )
                })
                .collect(),
        )
    }

    /// ln-likelihood of the data followed by p(class 1 | y) at each
    /// monitor point, under the current parameters.
    pub(super) fn monitored_statistics(&self, fit: &PreparedFit) -> Vec<f64> {
        let table = KernelTable::new(self);
        let mut stats = Vec::with_capacity(1 + fit.monitor_points.len());
        let mut scratch = vec![0.0; self.n_components()];
        let mut ll = 0.0;
        for i in 0..fit.n_records() {
            table.logits(fit.output(i), fit.classes[i], &mut scratch);
            ll += math::log_sum_exp(&scratch);
        }
        stats.push(ll);
        for y in &fit.monitor_points {
            table.logits(y, 1, &mut scratch);
            let ln_joint = math::log_sum_exp(&scratch);
            table.marginal_logits(y, &mut scratch);
            let ln_py = math::log_sum_exp(&scratch);
            stats.push(math::exp(ln_joint - ln_py));
        }
        stats
    }

    fn resample_assignments(&mut self, fit: &PreparedFit) {
        let table = KernelTable::new(self);
        let k = self.n_components();
        let mut probs = vec![0.0; k];
        for i in 0..fit.n_records() {
            table.logits(fit.output(i), fit.classes[i], &mut probs);
            let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let u = record_uniform(self.record_seed, fit.keys[i], self.sweep);
            self.assignments[i] = if max == f64::NEG_INFINITY {
                ((u * k as f64) as usize).min(k - 1)
            } else {
                let mut total = 0.0;
                for p in probs.iter_mut() {
                    *p = math::exp(*p - max);
                    total += *p;
                }
                pick(&probs, u * total)
            };
        }
        self.stats = SuffStats::compute(fit, &self.assignments, k);
    }

    /// Steps (2)–(4) of a sweep: weights, class simplices, then the
    /// Normal–Gamma output parameters of each component.
    fn update_parameters(&mut self, priors: &Priors) {
        let k = self.n_components();
        let c_n = priors.class_pseudo_counts.len();
        let d = priors.mean_location.len();

        let conc: Vec<f64> = self
            .stats
            .counts
            .iter()
            .map(|&n| priors.weight_concentration + n as f64)
            .collect();
        self.weights = dirichlet(&mut self.rng, &conc);

        for j in 0..k {
            let conc: Vec<f64> = (0..c_n)
                .map(|c| priors.class_pseudo_counts[c] + self.stats.class_counts[j * c_n + c] as f64)
                .collect();
            let alpha = dirichlet(&mut self.rng, &conc);
            self.alpha[j * c_n..(j + 1) * c_n].copy_from_slice(&alpha);
        }

        for j in 0..k {
            let n = self.stats.counts[j] as f64;
            for dim in 0..d {
                let idx = j * d + dim;
                let m0 = priors.mean_location[dim];
                let k0 = priors.mean_scale;
                let (kn, mn, gn, hn) = if n > 0.0 {
                    let xbar = self.stats.sums[idx] / n;
                    let kn = k0 + n;
                    let mn = (k0 * m0 + n * xbar) / kn;
                    let gn = priors.precision_shape + 0.5 * n;
                    let hn = priors.precision_rate[dim]
                        + 0.5 * self.stats.centered_ss[idx]
                        + k0 * n * (xbar - m0) * (xbar - m0) / (2.0 * kn);
                    (kn, mn, gn, hn)
                } else {
                    (k0, m0, priors.precision_shape, priors.precision_rate[dim])
                };
                let tau = Gamma::new(gn, 1.0 / hn)
                    .expect("valid gamma parameters")
                    .sample(&mut self.rng);
                let mu = Normal::new(mn, 1.0 / math::sqrt(kn * tau))
                    .expect("valid normal parameters")
                    .sample(&mut self.rng);
                self.means[idx] = mu;
                self.sds[idx] = 1.0 / math::sqrt(tau);
            }
        }
    }
}

/// One full Gibbs sweep: assignments, weights, class simplices, then
/// output parameters. Empty components draw from the prior.
pub fn gibbs_sweep(state: &mut ChainState, fit: &PreparedFit) {
    state.resample_assignments(fit);
    state.update_parameters(&fit.priors);
    state.sweep += 1;
}

/// Per-component constants for evaluating `ln q_k A(c|α_k) B(y|β_k)`.
struct KernelTable {
    /// ln q_k − Σ ln σ_kd − d/2 ln 2π
    offset: Vec<f64>,
    /// ln α_kc, `K·C`
    ln_alpha: Vec<f64>,
    means: Vec<f64>,
    inv_sd: Vec<f64>,
    c_n: usize,
    d: usize,
}

impl KernelTable {
    fn new(state: &ChainState) -> Self {
        let k = state.weights.len();
        let c_n = state.alpha.len() / k;
        let d = state.means.len() / k;
        let offset = (0..k)
            .map(|j| {
                let ln_sd: f64 = state.sds[j * d..(j + 1) * d].iter().map(|&s| math::ln(s)).sum();
                ln_or_neg_inf(state.weights[j]) - ln_sd - d as f64 * HALF_LN_2PI
            })
            .collect();
        KernelTable {
            offset,
            ln_alpha: state.alpha.iter().map(|&a| ln_or_neg_inf(a)).collect(),
            means: state.means.clone(),
            inv_sd: state.sds.iter().map(|&s| 1.0 / s).collect(),
            c_n,
            d,
        }
    }

    fn quad(&self, j: usize, y: &[f64]) -> f64 {
        let mut q = 0.0;
        for (dim, &yv) in y.iter().enumerate() {
            let z = (yv - self.means[j * self.d + dim]) * self.inv_sd[j * self.d + dim];
            q += z * z;
        }
        q
    }

    fn logits(&self, y: &[f64], class: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.offset[j] + self.ln_alpha[j * self.c_n + class] - 0.5 * self.quad(j, y);
        }
    }

    fn marginal_logits(&self, y: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.offset[j] - 0.5 * self.quad(j, y);
        }
    }
}

/// Index of the first cumulative weight exceeding `target`.
fn pick(weights: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = j;
            if target < acc {
                return j;
            }
        }
    }
    last_positive
}

/// ln of a Gamma(shape, 1) draw, stable for shapes far below 1.
fn ln_gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("valid gamma shape").sample(rng);
        ln_or_neg_inf(g)
    } else {
        // Gamma(a) = Gamma(a + 1) · U^(1/a)
        let g = Gamma::new(shape + 1.0, 1.0).expect("valid gamma shape").sample(rng);
        let u = 1.0 - rng.random::<f64>();
        ln_or_neg_inf(g) + math::ln(u) / shape
    }
}

/// Dirichlet draw normalized in log space; tiny entries may round to 0.
pub(crate) fn dirichlet<R: Rng + ?Sized>(rng: &mut R, concentration: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = concentration.iter().map(|&a| ln_gamma_draw(rng, a)).collect();
    let total = math::log_sum_exp(&logs);
    let mut x: Vec<f64> = logs.iter().map(|&l| math::exp(l - total)).collect();
    let s: f64 = x.iter().sum();
    for v in &mut x {
        *v /= s;
    }
    x
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) determined by (chain stream, record key, sweep).
fn record_uniform(seed: u64, key: u64, sweep: u64) -> f64 {
    let h = splitmix64(seed ^ splitmix64(key ^ splitmix64(sweep)));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
