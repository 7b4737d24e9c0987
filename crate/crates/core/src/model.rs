//! The fitted transducer: posterior samples of the long-run joint frequency
//! of (class, output), each a finite mixture of categorical × Gaussian
//! product kernels.
//!
//! Every query reduces the pooled `T·K` terms in a fixed sample-major,
//! component-minor order with a streaming log-sum-exp, so results are
//! reproducible bit for bit and never underflow to 0/0.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::calibrate::SamplerConfig;
use crate::data::DataSummary;
use crate::error::{Error, Result};
use crate::math::{self, LogSumExp, HALF_LN_2PI};

const WEIGHT_TOL: f64 = 1e-10;
const SIMPLEX_TOL: f64 = 1e-12;
const PROB_TOL: f64 = 1e-9;

/// One mixture term: weight, class simplex and per-dimension Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub class_params: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl MixtureComponent {
    pub fn new(weight: f64, class_params: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Self {
        Self {
            weight,
            class_params,
            means,
            sds,
        }
    }

    pub(crate) fn validate(&self, n_classes: usize, y_dim: usize) -> Result<()> {
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidConfig("component weight must be finite and >= 0".into()));
        }
        if self.class_params.len() != n_classes {
            return Err(Error::DimensionMismatch {
                expected: n_classes,
                found: self.class_params.len(),
            });
        }
        if self.means.len() != y_dim || self.sds.len() != y_dim {
            return Err(Error::DimensionMismatch {
                expected: y_dim,
                found: self.means.len().min(self.sds.len()),
            });
        }
        if self.class_params.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidConfig("class parameters must be finite and >= 0".into()));
        }
        let total: f64 = self.class_params.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidConfig("class parameters must sum to 1".into()));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite);
        }
        if self.sds.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(
                "standard deviations must be finite and > 0".into(),
            ));
        }
        Ok(())
    }
}

/// One posterior draw of the long-run frequency distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySample {
    pub components: Vec<MixtureComponent>,
}

impl FrequencySample {
    pub fn new(components: Vec<MixtureComponent>) -> Self {
        Self { components }
    }
}

/// A normalized probability over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilityVector(Vec<f64>);

impl ClassProbabilityVector {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidProbability("empty"));
        }
        if probabilities
            .iter()
            .any(|&p| !(0.0..=1.0).contains(&p) || !p.is_finite())
        {
            return Err(Error::InvalidProbability("entries must lie in [0, 1]"));
        }
        if (probabilities.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidProbability("entries must sum to 1"));
        }
        Ok(Self(probabilities))
    }

    /// Normalizes non-negative scores; callers guarantee a positive total.
    fn from_unnormalized(mut scores: Vec<f64>) -> Self {
        let total: f64 = scores.iter().sum();
        for s in &mut scores {
            *s = (*s / total).clamp(0.0, 1.0);
        }
        Self(scores)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl core::ops::Index<usize> for ClassProbabilityVector {
    type Output = f64;
    fn index(&self, c: usize) -> &f64 {
        &self.0[c]
    }
}

/// Class prevalences (base rates) of a deployment population.
#[derive(Debug, Clone, PartialEq)]
pub struct PrevalenceVector(Vec<f64>);

impl PrevalenceVector {
    pub fn new(prevalences: Vec<f64>) -> Result<Self> {
        if prevalences.is_empty() {
            return Err(Error::InvalidProbability("empty"));
        }
        if prevalences.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidProbability("prevalences must be finite and >= 0"));
        }
        if (prevalences.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProbability("prevalences must sum to 1"));
        }
        Ok(Self(prevalences))
    }

    /// Normalizes non-negative weights to a prevalence vector.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidProbability("prevalences must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidProbability("prevalences must not all be zero"));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// How a model was fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    /// Sampler configuration with every prior resolved.
    pub config: SamplerConfig,
    pub data: DataSummary,
}

/// Which class-given-output conditional to use for a new output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConditionalMode {
    /// The new output is exchangeable with the calibration outputs.
    #[default]
    Exchangeable,
    /// Average of every posterior sample's own conditional.
    NonExchangeable,
}

/// Log-density of the output and the class probabilities at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPosterior {
    pub ln_density: f64,
    pub probabilities: ClassProbabilityVector,
}

/// Flattened per-term constants, sample-major then component-minor.
#[derive(Debug, Clone)]
struct TermTable {
    ln_weight: Vec<f64>,
    ln_norm: Vec<f64>,
    alpha: Vec<f64>,
    mean: Vec<f64>,
    inv_sd: Vec<f64>,
    /// Σ_k q_k α_kc for each sample, `T·C`.
    sample_class_marginal: Vec<f64>,
    /// Pooled class marginal.
    class_marginal: Vec<f64>,
}

/// Accumulated sums of one pass over a range of terms at a fixed `y`.
struct Scan {
    lse: LogSumExp,
    /// Σ exp(l − max)·α_c per class.
    per_class: Vec<f64>,
}

/// Posterior samples of the joint frequency of class and output.
#[derive(Debug, Clone)]
pub struct TransducerModel {
    samples: Vec<FrequencySample>,
    n_classes: usize,
    y_dim: usize,
    n_components: usize,
    provenance: Option<Provenance>,
    terms: TermTable,
}

impl PartialEq for TransducerModel {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples
            && self.n_classes == other.n_classes
            && self.y_dim == other.y_dim
            && self.provenance == other.provenance
    }
}

impl TransducerModel {
    pub fn new(samples: Vec<FrequencySample>, n_classes: usize, y_dim: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("a model needs at least one sample".into()));
        }
        if n_classes < 2 || y_dim == 0 {
            return Err(Error::InvalidConfig("need n_classes >= 2 and y_dim >= 1".into()));
        }
        let k = samples[0].components.len();
        if k == 0 {
            return Err(Error::InvalidConfig("samples need at least one component".into()));
        }
        for s in &samples {
            if s.components.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: s.components.len(),
                });
            }
            for comp in &s.components {
                comp.validate(n_classes, y_dim)?;
            }
            let total: f64 = s.components.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > WEIGHT_TOL {
                return Err(Error::InvalidConfig("component weights must sum to 1".into()));
            }
        }
        let terms = TermTable::build(&samples, n_classes, y_dim);
        Ok(Self {
            samples,
            n_classes,
            y_dim,
            n_components: k,
            provenance: None,
            terms,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn samples(&self) -> &[FrequencySample] {
        &self.samples
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    fn ln_t(&self) -> f64 {
        math::ln(self.samples.len() as f64)
    }

    fn check_y(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.y_dim {
            return Err(Error::DimensionMismatch {
                expected: self.y_dim,
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    fn check_class(&self, c: usize) -> Result<()> {
        if c >= self.n_classes {
            return Err(Error::ClassOutOfRange {
                label: c,
                n_classes: self.n_classes,
            });
        }
        Ok(())
    }

    fn check_sample(&self, t: usize) -> Result<()> {
        if t >= self.samples.len() {
            return Err(Error::IndexOutOfRange {
                index: t,
                len: self.samples.len(),
            });
        }
        Ok(())
    }

    fn sample_range(&self, t: usize) -> Range<usize> {
        t * self.n_components..(t + 1) * self.n_components
    }

    fn all_terms(&self) -> Range<usize> {
        0..self.samples.len() * self.n_components
    }

    /// One pass over `range` at `y`; per-term log weights exclude the 1/T
    /// pooling factor.
    fn scan(&self, range: Range<usize>, y: &[f64]) -> Scan {
        let d = self.y_dim;
        let c_n = self.n_classes;
        let tt = &self.terms;
        let mut lse = LogSumExp::new();
        let mut per_class = vec![0.0; c_n];
        for j in range {
            let lw = tt.ln_weight[j];
            if lw == f64::NEG_INFINITY {
                continue;
            }
            let mut quad = 0.0;
            for (dim, &yv) in y.iter().enumerate() {
                let z = (yv - tt.mean[j * d + dim]) * tt.inv_sd[j * d + dim];
                quad += z * z;
            }
            let l = lw + tt.ln_norm[j] - 0.5 * quad;
            let (w, rescale) = lse.push(l);
            let alpha = &tt.alpha[j * c_n..(j + 1) * c_n];
            if rescale != 1.0 {
                for v in per_class.iter_mut() {
                    *v *= rescale;
                }
            }
            for (v, &a) in per_class.iter_mut().zip(alpha) {
                *v += w * a;
            }
        }
        Scan { lse, per_class }
    }

    /// p(c, y) pooled over all posterior samples.
    pub fn joint_density(&self, c: usize, y: &[f64]) -> Result<f64> {
        self.check_class(c)?;
        self.check_y(y)?;
        let s = self.scan(self.all_terms(), y);
        Ok(math::exp(s.lse.max() - self.ln_t()) * s.per_class[c])
    }

    pub fn marginal_class(&self, c: usize) -> Result<f64> {
        self.check_class(c)?;
        Ok(self.terms.class_marginal[c])
    }

    /// The pooled class marginal as a vector.
    pub fn class_marginal(&self) -> &[f64] {
        &self.terms.class_marginal
    }

    pub fn marginal_output(&self, y: &[f64]) -> Result<f64> {
        Ok(math::exp(self.ln_marginal_output(y)?))
    }

    pub fn ln_marginal_output(&self, y: &[f64]) -> Result<f64> {
        self.check_y(y)?;
        Ok(self.scan(self.all_terms(), y).lse.value() - self.ln_t())
    }

    /// p(c | y) treating the new output as exchangeable with the
    /// calibration outputs.
    pub fn conditional_class_given_output(&self, y: &[f64]) -> Result<ClassProbabilityVector> {
        Ok(self.posterior(y)?.probabilities)
    }

    /// Output log-density and exchangeable class probabilities in one pass.
    pub fn posterior(&self, y: &[f64]) -> Result<OutputPosterior> {
        self.check_y(y)?;
        let s = self.scan(self.all_terms(), y);
        Ok(OutputPosterior {
            ln_density: s.lse.value() - self.ln_t(),
            probabilities: ClassProbabilityVector::from_unnormalized(s.per_class),
        })
    }

    /// Average over posterior samples of each sample's own conditional.
    pub fn conditional_class_given_output_nonexchangeable(&self, y: &[f64]) -> Result<ClassProbabilityVector> {
        self.check_y(y)?;
        let mut acc = vec![0.0; self.n_classes];
        for t in 0..self.samples.len() {
            let p = self.sample_probabilities(t, y);
            for (a, v) in acc.iter_mut().zip(p.as_slice()) {
                *a += v;
            }
        }
        Ok(ClassProbabilityVector::from_unnormalized(acc))
    }

    /// p(y | c), the generative conditional.
    pub fn conditional_output_given_class(&self, c: usize, y: &[f64]) -> Result<f64> {
        Ok(math::exp(self.ln_conditional_output_given_class(c, y)?))
    }

    pub fn ln_conditional_output_given_class(&self, c: usize, y: &[f64]) -> Result<f64> {
        self.check_class(c)?;
        self.check_y(y)?;
        let pc = self.terms.class_marginal[c];
        if pc <= 0.0 {
            return Err(Error::UndefinedConditional("class has zero marginal probability"));
        }
        let s = self.scan(self.all_terms(), y);
        Ok(s.lse.max() - self.ln_t() + math::ln(s.per_class[c]) - math::ln(pc))
    }

    /// Class probabilities for a population with prevalences `r`, through
    /// the generative conditional and Bayes's theorem.
    pub fn reweight_with_prevalence(&self, y: &[f64], r: &PrevalenceVector) -> Result<ClassProbabilityVector> {
        self.check_y(y)?;
        if r.as_slice().len() != self.n_classes {
            return Err(Error::DimensionMismatch {
                expected: self.n_classes,
                found: r.as_slice().len(),
            });
        }
        let s = self.scan(self.all_terms(), y);
        reweight(&s.per_class, &self.terms.class_marginal, r.as_slice())
    }

    /// p(c | y) under posterior sample `t` alone.
    pub fn per_sample_conditional(&self, t: usize, y: &[f64]) -> Result<ClassProbabilityVector> {
        self.check_sample(t)?;
        self.check_y(y)?;
        Ok(self.sample_probabilities(t, y))
    }

    /// Output log-density and class probabilities under sample `t`.
    pub fn sample_posterior(&self, t: usize, y: &[f64]) -> Result<OutputPosterior> {
        self.check_sample(t)?;
        self.check_y(y)?;
        let s = self.scan(self.sample_range(t), y);
        Ok(OutputPosterior {
            ln_density: s.lse.value(),
            probabilities: ClassProbabilityVector::from_unnormalized(s.per_class),
        })
    }

    /// p(y | c) under sample `t`.
    pub fn sample_conditional_output_given_class(&self, t: usize, c: usize, y: &[f64]) -> Result<f64> {
        self.check_sample(t)?;
        self.check_class(c)?;
        self.check_y(y)?;
        let pc = self.terms.sample_class_marginal[t * self.n_classes + c];
        if pc <= 0.0 {
            return Err(Error::UndefinedConditional("class has zero marginal probability"));
        }
        let s = self.scan(self.sample_range(t), y);
        Ok(math::exp(s.lse.max() + math::ln(s.per_class[c]) - math::ln(pc)))
    }

    /// Class marginal of sample `t`.
    pub fn sample_class_marginal(&self, t: usize) -> Result<&[f64]> {
        self.check_sample(t)?;
        let c = self.n_classes;
        Ok(&self.terms.sample_class_marginal[t * c..(t + 1) * c])
    }

    /// Class probabilities under sample `t` reweighted to prevalences `r`.
    pub fn sample_reweight_with_prevalence(
        &self,
        t: usize,
        y: &[f64],
        r: &PrevalenceVector,
    ) -> Result<ClassProbabilityVector> {
        self.check_sample(t)?;
        self.check_y(y)?;
        let s = self.scan(self.sample_range(t), y);
        let c = self.n_classes;
        reweight(
            &s.per_class,
            &self.terms.sample_class_marginal[t * c..(t + 1) * c],
            r.as_slice(),
        )
    }

    /// Class probabilities at `y` in the given mode, optionally for a
    /// population with prevalences `r`.
    pub fn class_probabilities(
        &self,
        y: &[f64],
        mode: ConditionalMode,
        r: Option<&PrevalenceVector>,
    ) -> Result<ClassProbabilityVector> {
        match (mode, r) {
            (ConditionalMode::Exchangeable, None) => self.conditional_class_given_output(y),
            (ConditionalMode::Exchangeable, Some(r)) => self.reweight_with_prevalence(y, r),
            (ConditionalMode::NonExchangeable, None) => self.conditional_class_given_output_nonexchangeable(y),
            (ConditionalMode::NonExchangeable, Some(r)) => {
                if r.as_slice().len() != self.n_classes {
                    return Err(Error::DimensionMismatch {
                        expected: self.n_classes,
                        found: r.as_slice().len(),
                    });
                }
                let mut acc = vec![0.0; self.n_classes];
                for t in 0..self.samples.len() {
                    let p = self.sample_reweight_with_prevalence(t, y, r)?;
                    for (a, v) in acc.iter_mut().zip(p.as_slice()) {
                        *a += v;
                    }
                }
                Ok(ClassProbabilityVector::from_unnormalized(acc))
            }
        }
    }

    fn sample_probabilities(&self, t: usize, y: &[f64]) -> ClassProbabilityVector {
        let s = self.scan(self.sample_range(t), y);
        ClassProbabilityVector::from_unnormalized(s.per_class)
    }

    /// Σ_i ln p(y_i, c_i) under sample `t` alone.
    pub fn sample_ln_likelihood(&self, t: usize, records: &[crate::data::CalibrationRecord]) -> Result<f64> {
        self.check_sample(t)?;
        let mut total = 0.0;
        for r in records {
            self.check_class(r.class_label)?;
            self.check_y(&r.output)?;
            let s = self.scan(self.sample_range(t), &r.output);
            total += s.lse.max() + math::ln(s.per_class[r.class_label]);
        }
        Ok(total)
    }
}

/// Shared Bayes-with-base-rates step: `per_class[c] / marginal[c]` is
/// proportional to p(y | c).
fn reweight(per_class: &[f64], marginal: &[f64], r: &[f64]) -> Result<ClassProbabilityVector> {
    let mut scores = vec![0.0; per_class.len()];
    for c in 0..per_class.len() {
        if r[c] == 0.0 {
            continue;
        }
        if marginal[c] <= 0.0 {
            return Err(Error::UndefinedConditional(
                "positive prevalence for a class with zero marginal probability",
            ));
        }
        scores[c] = r[c] * per_class[c] / marginal[c];
    }
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedConditional("all reweighted likelihoods are zero"));
    }
    Ok(ClassProbabilityVector::from_unnormalized(scores))
}

impl TermTable {
    fn build(samples: &[FrequencySample], n_classes: usize, y_dim: usize) -> Self {
        let k = samples[0].components.len();
        let n = samples.len() * k;
        let mut tt = TermTable {
            ln_weight: Vec::with_capacity(n),
            ln_norm: Vec::with_capacity(n),
            alpha: Vec::with_capacity(n * n_classes),
            mean: Vec::with_capacity(n * y_dim),
            inv_sd: Vec::with_capacity(n * y_dim),
            sample_class_marginal: Vec::with_capacity(samples.len() * n_classes),
            class_marginal: vec![0.0; n_classes],
        };
        let t_count = samples.len() as f64;
        for s in samples {
            let mut marg = vec![0.0; n_classes];
            for comp in &s.components {
                tt.ln_weight.push(if comp.weight > 0.0 {
                    math::ln(comp.weight)
                } else {
                    f64::NEG_INFINITY
                });
                let ln_sd: f64 = comp.sds.iter().map(|&s| math::ln(s)).sum();
                tt.ln_norm.push(-ln_sd - y_dim as f64 * HALF_LN_2PI);
                tt.alpha.extend_from_slice(&comp.class_params);
                tt.mean.extend_from_slice(&comp.means);
                tt.inv_sd.extend(comp.sds.iter().map(|&s| 1.0 / s));
                for (m, &a) in marg.iter_mut().zip(&comp.class_params) {
                    *m += comp.weight * a;
                }
            }
            for (pooled, &m) in tt.class_marginal.iter_mut().zip(&marg) {
                *pooled += m / t_count;
            }
            tt.sample_class_marginal.extend_from_slice(&marg);
        }
        tt
    }
}
