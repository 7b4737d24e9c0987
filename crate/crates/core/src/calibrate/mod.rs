//! Fitting a transducer: Gibbs sampling of the finite-mixture posterior
//! over independent chains.
//!
//! Chains never share state. [`PreparedFit::run_chain`] is the unit of
//! work; [`fit`] runs them in order on the calling thread, and any other
//! executor that calls `run_chain` for every chain index and hands the
//! outputs to [`PreparedFit::assemble`] produces the identical model.

mod diagnostics;
mod sampler;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use diagnostics::{
    diagnostics, effective_sample_size, split_rhat, ChainTrace, DiagnosticsReport, StatisticDiagnostic, RHAT_THRESHOLD,
};
pub use sampler::{gibbs_sweep, ChainState, SuffStats};

use crate::data::{CalibrationRecord, CalibrationSet, DataSummary};
use crate::error::{Error, Result};
use crate::math;
use crate::model::{FrequencySample, Provenance, TransducerModel};

/// Largest output dimension a transducer is fitted for.
pub const MAX_Y_DIM: usize = 4;

/// Variance floor used when the data have no spread in some dimension.
const MIN_DATA_VARIANCE: f64 = 1e-6;

/// Prior hyperparameters. `None` fields are resolved from the data (or
/// from `K`) when a fit is prepared.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    /// Dirichlet concentration per component weight; default `1/K`.
    pub weight_concentration: Option<f64>,
    /// Dirichlet pseudo-counts of the class simplex; default all 1.
    pub class_pseudo_counts: Option<Vec<f64>>,
    /// Normal prior location of component means; default the data mean.
    pub mean_location: Option<Vec<f64>>,
    /// Normal prior precision multiplier κ₀.
    pub mean_scale: f64,
    /// Gamma shape of component precisions.
    pub precision_shape: f64,
    /// Gamma rate of component precisions; default `2 · data variance`.
    pub precision_rate: Option<Vec<f64>>,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            weight_concentration: None,
            class_pseudo_counts: None,
            mean_location: None,
            mean_scale: 0.01,
            precision_shape: 2.0,
            precision_rate: None,
        }
    }
}

/// Fully resolved priors.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub weight_concentration: f64,
    pub class_pseudo_counts: Vec<f64>,
    pub mean_location: Vec<f64>,
    pub mean_scale: f64,
    pub precision_shape: f64,
    pub precision_rate: Vec<f64>,
}

impl PriorSpec {
    pub fn resolve(&self, k: usize, summary: &DataSummary, n_classes: usize) -> Result<Priors> {
        let d = summary.y_mean.len();
        let priors = Priors {
            weight_concentration: self.weight_concentration.unwrap_or(1.0 / k as f64),
            class_pseudo_counts: self.class_pseudo_counts.clone().unwrap_or_else(|| vec![1.0; n_classes]),
            mean_location: self.mean_location.clone().unwrap_or_else(|| summary.y_mean.clone()),
            mean_scale: self.mean_scale,
            precision_shape: self.precision_shape,
            precision_rate: self
                .precision_rate
                .clone()
                .unwrap_or_else(|| summary.y_var.iter().map(|&v| 2.0 * v.max(MIN_DATA_VARIANCE)).collect()),
        };
        if priors.class_pseudo_counts.len() != n_classes {
            return Err(Error::DimensionMismatch {
                expected: n_classes,
                found: priors.class_pseudo_counts.len(),
            });
        }
        if priors.mean_location.len() != d || priors.precision_rate.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: priors.mean_location.len().min(priors.precision_rate.len()),
            });
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(priors.weight_concentration)
            || !positive(priors.mean_scale)
            || !positive(priors.precision_shape)
            || !priors.class_pseudo_counts.iter().all(|&a| positive(a))
            || !priors.precision_rate.iter().all(|&h| positive(h))
        {
            return Err(Error::InvalidConfig("prior hyperparameters must be > 0".into()));
        }
        if priors.mean_location.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(priors)
    }
}

impl From<&Priors> for PriorSpec {
    fn from(p: &Priors) -> Self {
        Self {
            weight_concentration: Some(p.weight_concentration),
            class_pseudo_counts: Some(p.class_pseudo_counts.clone()),
            mean_location: Some(p.mean_location.clone()),
            mean_scale: p.mean_scale,
            precision_shape: p.precision_shape,
            precision_rate: Some(p.precision_rate.clone()),
        }
    }
}

/// Sampler settings. The seed has no default.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub components: usize,
    /// Total retained posterior samples across all chains.
    pub samples: usize,
    pub chains: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub priors: PriorSpec,
}

impl SamplerConfig {
    /// Default settings: 64 components, 4096 samples from 16 chains, 2000
    /// burn-in sweeps, thinning 10.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            components: 64,
            samples: 4096,
            chains: 16,
            burn_in: 2000,
            thinning: 10,
            seed,
            priors: PriorSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.components == 0 {
            return fail("components must be >= 1".into());
        }
        if self.chains == 0 || self.samples == 0 {
            return fail("samples and chains must be >= 1".into());
        }
        if !self.samples.is_multiple_of(self.chains) {
            return fail(format!(
                "samples ({}) must be divisible by chains ({})",
                self.samples, self.chains
            ));
        }
        if self.thinning == 0 {
            return fail("thinning must be >= 1".into());
        }
        Ok(())
    }

    pub fn samples_per_chain(&self) -> usize {
        self.samples / self.chains
    }

    /// Sweeps each chain performs, burn-in included.
    pub fn sweeps_per_chain(&self) -> usize {
        self.burn_in + self.samples_per_chain() * self.thinning
    }
}

/// Calibration data in sampler layout together with the resolved priors.
#[derive(Debug, Clone)]
pub struct PreparedFit {
    config: SamplerConfig,
    priors: Priors,
    data: CalibrationSet,
    keys: Vec<u64>,
    classes: Vec<usize>,
    outputs: Vec<f64>,
    summary: DataSummary,
    monitor_points: Vec<Vec<f64>>,
}

/// Retained samples and monitored statistics of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub chain: usize,
    pub samples: Vec<FrequencySample>,
    pub trace: ChainTrace,
}

/// A fitted model with the per-chain traces used for diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: TransducerModel,
    pub traces: Vec<ChainTrace>,
    pub statistic_names: Vec<String>,
}

impl FitResult {
    pub fn diagnostics(&self) -> Result<DiagnosticsReport> {
        diagnostics(&self.traces, &self.statistic_names)
    }
}

impl PreparedFit {
    /// Validates inputs and resolves priors; records are keyed by position.
    pub fn new(data: &CalibrationSet, config: &SamplerConfig) -> Result<Self> {
        let keys: Vec<u64> = (0..data.len() as u64).collect();
        Self::with_record_keys(data, &keys, config)
    }

    /// As [`PreparedFit::new`] with caller-supplied unique record keys. The
    /// sampler visits records in key order and draws each record's
    /// assignment from a stream tied to its key, so jointly permuting
    /// records and keys leaves the fit unchanged.
    pub fn with_record_keys(data: &CalibrationSet, keys: &[u64], config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        if data.y_dim() > MAX_Y_DIM {
            return Err(Error::InvalidConfig(format!(
                "output dimension {} exceeds the supported maximum {MAX_Y_DIM}",
                data.y_dim()
            )));
        }
        if keys.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                found: keys.len(),
            });
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by_key(|&i| keys[i]);
        if order.windows(2).any(|w| keys[w[0]] == keys[w[1]]) {
            return Err(Error::InvalidConfig("record keys must be unique".into()));
        }
        let records: Vec<CalibrationRecord> = order.iter().map(|&i| data.records()[i].clone()).collect();
        let sorted = CalibrationSet::new(records, data.n_classes(), data.y_dim())?;
        let keys: Vec<u64> = order.iter().map(|&i| keys[i]).collect();
        let summary = sorted.summary()?;
        let priors = config.priors.resolve(config.components, &summary, sorted.n_classes())?;
        let classes = sorted.records().iter().map(|r| r.class_label).collect();
        let outputs = sorted.records().iter().flat_map(|r| r.output.iter().copied()).collect();
        let monitor_points = monitor_points(&sorted);
        let mut config = config.clone();
        config.priors = PriorSpec::from(&priors);
        Ok(Self {
            config,
            priors,
            data: sorted,
            keys,
            classes,
            outputs,
            summary,
            monitor_points,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn priors(&self) -> &Priors {
        &self.priors
    }

    /// The records in sampler (key) order.
    pub fn data(&self) -> &CalibrationSet {
        &self.data
    }

    pub fn summary(&self) -> &DataSummary {
        &self.summary
    }

    /// Output points where p(class 1 | y) is monitored for diagnostics.
    pub fn monitor_points(&self) -> &[Vec<f64>] {
        &self.monitor_points
    }

    pub fn statistic_names(&self) -> Vec<String> {
        let mut names = vec![String::from("ln_likelihood")];
        for p in &self.monitor_points {
            let coords: Vec<String> = p.iter().map(|v| format!("{v:.4}")).collect();
            names.push(format!("p1_at[{}]", coords.join(",")));
        }
        names
    }

    fn n_records(&self) -> usize {
        self.classes.len()
    }

    fn y_dim(&self) -> usize {
        self.data.y_dim()
    }

    fn n_classes(&self) -> usize {
        self.data.n_classes()
    }

    fn output(&self, i: usize) -> &[f64] {
        let d = self.y_dim();
        &self.outputs[i * d..(i + 1) * d]
    }

    /// Runs chain `chain` to completion.
    pub fn run_chain(&self, chain: usize) -> ChainOutput {
        let mut state = ChainState::init(self, chain);
        for _ in 0..self.config.burn_in {
            gibbs_sweep(&mut state, self);
        }
        let kept = self.config.samples_per_chain();
        let mut samples = Vec::with_capacity(kept);
        let mut trace = ChainTrace::with_statistics(1 + self.monitor_points.len(), kept);
        for _ in 0..kept {
            for _ in 0..self.config.thinning {
                gibbs_sweep(&mut state, self);
            }
            trace.push(&state.monitored_statistics(self));
            samples.push(state.frequency_sample());
        }
        ChainOutput { chain, samples, trace }
    }

    /// Concatenates chain outputs in chain order into a model.
    pub fn assemble(&self, mut outputs: Vec<ChainOutput>) -> Result<FitResult> {
        outputs.sort_by_key(|o| o.chain);
        let expected: Vec<usize> = (0..self.config.chains).collect();
        let got: Vec<usize> = outputs.iter().map(|o| o.chain).collect();
        if got != expected {
            return Err(Error::InvalidConfig("missing or duplicate chain outputs".into()));
        }
        let mut samples = Vec::with_capacity(self.config.samples);
        let mut traces = Vec::with_capacity(outputs.len());
        for o in outputs {
            samples.extend(o.samples);
            traces.push(o.trace);
        }
        let model = TransducerModel::new(samples, self.n_classes(), self.y_dim())?.with_provenance(Provenance {
            config: self.config.clone(),
            data: self.summary.clone(),
        });
        Ok(FitResult {
            model,
            traces,
            statistic_names: self.statistic_names(),
        })
    }
}

/// Fits a transducer, running all chains sequentially.
pub fn fit(data: &CalibrationSet, config: &SamplerConfig) -> Result<TransducerModel> {
    Ok(fit_with_traces(data, config)?.model)
}

pub fn fit_with_traces(data: &CalibrationSet, config: &SamplerConfig) -> Result<FitResult> {
    let prepared = PreparedFit::new(data, config)?;
    let outputs = (0..config.chains).map(|c| prepared.run_chain(c)).collect();
    prepared.assemble(outputs)
}

/// Five outputs spread over the data: the records at the 10/30/50/70/90%
/// order statistics of the first output coordinate.
fn monitor_points(data: &CalibrationSet) -> Vec<Vec<f64>> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_by(|&a, &b| data.records()[a].output[0].total_cmp(&data.records()[b].output[0]));
    [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|&q| {
            let pos = libm::floor(q * (data.len() - 1) as f64) as usize;
            data.records()[idx[pos]].output.clone()
        })
        .collect()
}

/// Posterior pseudo-counts of the class simplex of component `k`.
pub fn class_posterior_pseudo_counts(state: &ChainState, priors: &Priors, k: usize) -> Vec<f64> {
    let c = priors.class_pseudo_counts.len();
    (0..c)
        .map(|j| priors.class_pseudo_counts[j] + state.stats().class_counts[k * c + j] as f64)
        .collect()
}

#[inline]
pub(crate) fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        math::ln(x)
    } else {
        f64::NEG_INFINITY
    }
}
