use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::TransducerModel;

/// Default band: the central 75% of per-sample curve values.
pub const DEFAULT_QUANTILES: (f64, f64) = (0.125, 0.875);

/// Fewer posterior samples than this make band quantiles unreliable.
pub const MIN_RELIABLE_SAMPLES: usize = 8;

/// Which probability curve a band is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// p(class | y)
    ClassConditional { class: usize },
    /// p(y | class)
    Generative { class: usize },
}

/// Pooled curve with pointwise quantiles of the per-sample curves.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBand {
    pub points: Vec<Vec<f64>>,
    pub curve: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub quantiles: (f64, f64),
    /// False when there are too few samples for stable quantiles.
    pub reliable: bool,
}

/// The pooled curve of `kind` at one point.
pub fn pooled_curve_value(model: &TransducerModel, kind: CurveKind, y: &[f64]) -> Result<f64> {
    match kind {
        CurveKind::ClassConditional { class } => {
            check_class(model, class)?;
            Ok(model.conditional_class_given_output(y)?[class])
        }
        CurveKind::Generative { class } => model.conditional_output_given_class(class, y),
    }
}

/// The curve of `kind` under posterior sample `t` at one point.
pub fn sample_curve_value(model: &TransducerModel, t: usize, kind: CurveKind, y: &[f64]) -> Result<f64> {
    match kind {
        CurveKind::ClassConditional { class } => {
            check_class(model, class)?;
            Ok(model.per_sample_conditional(t, y)?[class])
        }
        CurveKind::Generative { class } => model.sample_conditional_output_given_class(t, class, y),
    }
}

fn check_class(model: &TransducerModel, class: usize) -> Result<()> {
    if class >= model.n_classes() {
        return Err(Error::ClassOutOfRange {
            label: class,
            n_classes: model.n_classes(),
        });
    }
    Ok(())
}

/// Quantiles `(q_lo, q_hi)` of the per-sample curves at each point.
pub fn variability_band(
    model: &TransducerModel,
    points: &[Vec<f64>],
    q_lo: f64,
    q_hi: f64,
    kind: CurveKind,
) -> Result<QuantileBand> {
    if !(0.0..=1.0).contains(&q_lo) || !(0.0..=1.0).contains(&q_hi) || !(q_lo < q_hi) {
        return Err(Error::InvalidConfig("band quantiles need 0 <= lo < hi <= 1".into()));
    }
    let mut curve = Vec::with_capacity(points.len());
    let mut lower = Vec::with_capacity(points.len());
    let mut upper = Vec::with_capacity(points.len());
    let mut values = Vec::with_capacity(model.n_samples());
    for y in points {
        curve.push(pooled_curve_value(model, kind, y)?);
        values.clear();
        for t in 0..model.n_samples() {
            values.push(sample_curve_value(model, t, kind, y)?);
        }
        math::sort_floats(&mut values);
        lower.push(math::quantile_sorted(&values, q_lo));
        upper.push(math::quantile_sorted(&values, q_hi));
    }
    Ok(QuantileBand {
        points: points.to_vec(),
        curve,
        lower,
        upper,
        quantiles: (q_lo, q_hi),
        reliable: model.n_samples() >= MIN_RELIABLE_SAMPLES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FrequencySample, MixtureComponent};
    use alloc::vec;

    fn sample(a1: f64, mu: f64) -> FrequencySample {
        FrequencySample::new(vec![
            MixtureComponent::new(0.5, vec![1.0 - a1, a1], vec![mu], vec![0.3]),
            MixtureComponent::new(0.5, vec![0.9, 0.1], vec![0.0], vec![0.3]),
        ])
    }

    #[test]
    fn identical_samples_give_zero_width() {
        let m = TransducerModel::new(vec![sample(0.8, 1.0); 10], 2, 1).unwrap();
        let pts = vec![vec![0.0], vec![0.5], vec![1.0]];
        for kind in [
            CurveKind::ClassConditional { class: 1 },
            CurveKind::Generative { class: 0 },
        ] {
            let b = variability_band(&m, &pts, 0.125, 0.875, kind).unwrap();
            for i in 0..3 {
                assert!((b.lower[i] - b.upper[i]).abs() < 1e-15);
                assert!((b.curve[i] - b.lower[i]).abs() < 1e-12);
            }
            assert!(b.reliable);
        }
    }

    #[test]
    fn full_range_band_is_min_max() {
        let samples: Vec<_> = (0..9).map(|i| sample(0.5 + 0.05 * i as f64, 1.0)).collect();
        let m = TransducerModel::new(samples, 2, 1).unwrap();
        let pts = vec![vec![1.0]];
        let b = variability_band(&m, &pts, 0.0, 1.0, CurveKind::ClassConditional { class: 1 }).unwrap();
        let vals: Vec<f64> = (0..9)
            .map(|t| m.per_sample_conditional(t, &[1.0]).unwrap()[1])
            .collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((b.lower[0], b.upper[0]), (lo, hi));
        assert!(b.lower[0] <= b.curve[0] && b.curve[0] <= b.upper[0]);
    }

    #[test]
    fn few_samples_are_flagged() {
        let m = TransducerModel::new(vec![sample(0.8, 1.0); 3], 2, 1).unwrap();
        let b = variability_band(&m, &[vec![0.0]], 0.1, 0.9, CurveKind::ClassConditional { class: 1 }).unwrap();
        assert!(!b.reliable);
    }

    #[test]
    fn bad_quantiles() {
        let m = TransducerModel::new(vec![sample(0.8, 1.0)], 2, 1).unwrap();
        let pts = [vec![0.0]];
        let k = CurveKind::ClassConditional { class: 1 };
        assert!(variability_band(&m, &pts, 0.9, 0.1, k).is_err());
        assert!(variability_band(&m, &pts, -0.1, 0.5, k).is_err());
        let bad = CurveKind::ClassConditional { class: 5 };
        assert!(variability_band(&m, &pts, 0.1, 0.9, bad).is_err());
    }
}
