use alloc::vec;
use alloc::vec::Vec;

use crate::decide::UtilityMatrix;
use crate::error::{Error, Result};

/// Decisions × classes tally. Binary ties contribute half a point to each
/// tied decision row.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    n_decisions: usize,
    n_classes: usize,
    counts: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn zeros(n_decisions: usize, n_classes: usize) -> Self {
        Self {
            n_decisions,
            n_classes,
            counts: vec![0.0; n_decisions * n_classes],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_classes = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.is_empty() || n_classes == 0 {
            return Err(Error::EmptyConfusion);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n_classes) {
            return Err(Error::DimensionMismatch {
                expected: n_classes,
                found: bad.len(),
            });
        }
        let counts = rows.concat();
        if counts
            .iter()
            .any(|&v| !(v >= 0.0 && v.is_finite()) || libm::trunc(2.0 * v) != 2.0 * v)
        {
            return Err(Error::InvalidConfig(
                "confusion entries must be non-negative multiples of 0.5".into(),
            ));
        }
        Ok(Self {
            n_decisions: rows.len(),
            n_classes,
            counts,
        })
    }

    pub fn n_decisions(&self) -> usize {
        self.n_decisions
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, decision: usize, class: usize) -> f64 {
        self.counts[decision * self.n_classes + class]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.counts.chunks(self.n_classes).map(|r| r.to_vec()).collect()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Column sums: records per true class.
    pub fn class_totals(&self) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| (0..self.n_decisions).map(|i| self.get(i, c)).sum())
            .collect()
    }

    fn add(&mut self, decision: usize, class: usize, amount: f64) {
        self.counts[decision * self.n_classes + class] += amount;
    }
}

/// Tallies chosen decision sets against true classes. A set of two tied
/// decisions gives each half a point.
pub fn accumulate_confusion(
    decisions: &[Vec<usize>],
    truths: &[usize],
    n_decisions: usize,
    n_classes: usize,
) -> Result<ConfusionMatrix> {
    if decisions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            found: decisions.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(n_decisions, n_classes);
    for (chosen, &truth) in decisions.iter().zip(truths) {
        if truth >= n_classes {
            return Err(Error::ClassOutOfRange {
                label: truth,
                n_classes,
            });
        }
        if let Some(&bad) = chosen.iter().find(|&&d| d >= n_decisions) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: n_decisions,
            });
        }
        match chosen.as_slice() {
            [d] => cm.add(*d, truth, 1.0),
            [a, b] => {
                cm.add(*a, truth, 0.5);
                cm.add(*b, truth, 0.5);
            }
            [] => return Err(Error::InvalidConfig("empty decision set".into())),
            many => return Err(Error::UnsplittableTie(many.len())),
        }
    }
    Ok(cm)
}

fn check_shapes(u: &UtilityMatrix, n_decisions: usize, n_classes: usize) -> Result<()> {
    if u.n_decisions() != n_decisions {
        return Err(Error::DimensionMismatch {
            expected: u.n_decisions(),
            found: n_decisions,
        });
    }
    if u.n_classes() != n_classes {
        return Err(Error::DimensionMismatch {
            expected: u.n_classes(),
            found: n_classes,
        });
    }
    Ok(())
}

/// Per-datum utility: Σ_ij U_ij C_ij / N.
pub fn utility_yield(u: &UtilityMatrix, cm: &ConfusionMatrix) -> Result<f64> {
    check_shapes(u, cm.n_decisions, cm.n_classes)?;
    let n = cm.total();
    if n <= 0.0 {
        return Err(Error::EmptyConfusion);
    }
    let grand: f64 = u.entries().iter().zip(&cm.counts).map(|(a, b)| a * b).sum();
    Ok(grand / n)
}

/// Lowest and highest achievable per-datum yields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

/// Yields when every record gets the worst or the best decision for its
/// class.
pub fn achievable_bounds(u: &UtilityMatrix, class_counts: &[f64]) -> Result<Bounds> {
    if class_counts.len() != u.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: u.n_classes(),
            found: class_counts.len(),
        });
    }
    let n: f64 = class_counts.iter().sum();
    if !(n > 0.0) {
        return Err(Error::EmptyConfusion);
    }
    let mut lo = 0.0;
    let mut hi = 0.0;
    for (c, &count) in class_counts.iter().enumerate() {
        let column = (0..u.n_decisions()).map(|i| u.get(i, c));
        let (cmin, cmax) = column.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        lo += count * cmin;
        hi += count * cmax;
    }
    Ok(Bounds {
        min: lo / n,
        max: hi / n,
    })
}

/// Maps the achievable range onto [0, 1].
pub fn rescaled_yield(yield_per_datum: f64, bounds: Bounds) -> Result<f64> {
    if !(bounds.max > bounds.min) {
        return Err(Error::DegenerateBounds {
            min: bounds.min,
            max: bounds.max,
        });
    }
    Ok((yield_per_datum - bounds.min) / (bounds.max - bounds.min))
}

/// The standard use of a classifier: the class its raw output ranks
/// highest. A scalar output is read as the score of class 1 of two; an
/// output with one entry per class as per-class scores. Exact ties return
/// every tied class.
pub fn raw_argmax_decision(output: &[f64], n_classes: usize) -> Result<Vec<usize>> {
    let scores: Vec<f64> = match (output.len(), n_classes) {
        (1, 2) => vec![1.0 - output[0], output[0]],
        (d, c) if d == c => output.to_vec(),
        (d, _) => {
            return Err(Error::DimensionMismatch {
                expected: n_classes,
                found: d,
            })
        }
    };
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((0..scores.len()).filter(|&c| scores[c] == best).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct_binary() {
        let d = vec![vec![0], vec![1], vec![0], vec![1]];
        let cm = accumulate_confusion(&d, &[0, 1, 0, 1], 2, 2).unwrap();
        assert_eq!(cm.rows(), vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
    }

    #[test]
    fn tie_gives_half_points() {
        let cm = accumulate_confusion(&[vec![0, 1]], &[0], 2, 2).unwrap();
        assert_eq!(cm.rows(), vec![vec![0.5, 0.0], vec![0.5, 0.0]]);
        assert_eq!(cm.total(), 1.0);
    }

    #[test]
    fn wide_ties_and_bad_labels_are_rejected() {
        assert_eq!(
            accumulate_confusion(&[vec![0, 1, 2]], &[0], 3, 2),
            Err(Error::UnsplittableTie(3))
        );
        assert!(matches!(
            accumulate_confusion(&[vec![0]], &[2], 2, 2),
            Err(Error::ClassOutOfRange { .. })
        ));
        assert!(accumulate_confusion(&[vec![0]], &[0, 1], 2, 2).is_err());
    }

    #[test]
    fn half_point_entries_are_accepted() {
        let cm = ConfusionMatrix::from_rows(&[vec![3225.0, 79.5], vec![37.0, 246.5]]).unwrap();
        assert_eq!(cm.total(), 3588.0);
        assert_eq!(cm.class_totals(), vec![3262.0, 326.0]);
        assert!(ConfusionMatrix::from_rows(&[vec![0.25, 1.0]]).is_err());
        assert!(ConfusionMatrix::from_rows(&[vec![-1.0, 1.0]]).is_err());
    }

    #[test]
    fn yields() {
        let cm = ConfusionMatrix::from_rows(&[vec![3207.0, 38.0], vec![55.0, 288.0]]).unwrap();
        let y = utility_yield(&UtilityMatrix::identity(2), &cm).unwrap();
        assert!((y - 0.974).abs() < 0.0005);
        let all_zero = ConfusionMatrix::from_rows(&[vec![3262.0, 326.0], vec![0.0, 0.0]]).unwrap();
        let iv = UtilityMatrix::binary(10.0, 0.0, -10.0, 1.0).unwrap();
        assert!((utility_yield(&iv, &all_zero).unwrap() - 9.09).abs() < 0.005);
        let zero = UtilityMatrix::binary(0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(utility_yield(&zero, &cm).unwrap(), 0.0);
        let empty = ConfusionMatrix::zeros(2, 2);
        assert_eq!(utility_yield(&zero, &empty), Err(Error::EmptyConfusion));
    }

    #[test]
    fn bounds() {
        let counts = [3262.0, 326.0];
        let ii = UtilityMatrix::binary(1.0, -10.0, 0.0, 10.0).unwrap();
        let b = achievable_bounds(&ii, &counts).unwrap();
        assert!((b.min + 0.91).abs() < 0.005 && (b.max - 1.82).abs() < 0.005);
        let b = achievable_bounds(&UtilityMatrix::identity(2), &[5.0, 9.0]).unwrap();
        assert_eq!((b.min, b.max), (0.0, 1.0));
        assert!(achievable_bounds(&ii, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn rescaling() {
        let b = Bounds { min: -1.0, max: 3.0 };
        assert_eq!(rescaled_yield(3.0, b).unwrap(), 1.0);
        assert_eq!(rescaled_yield(1.0, b).unwrap(), 0.5);
        assert!(matches!(
            rescaled_yield(1.0, Bounds { min: 1.0, max: 1.0 }),
            Err(Error::DegenerateBounds { .. })
        ));
    }

    #[test]
    fn raw_argmax() {
        assert_eq!(raw_argmax_decision(&[0.7], 2).unwrap(), vec![1]);
        assert_eq!(raw_argmax_decision(&[0.5], 2).unwrap(), vec![0, 1]);
        assert_eq!(raw_argmax_decision(&[2.0, -1.0], 2).unwrap(), vec![0]);
        assert!(raw_argmax_decision(&[1.0, 2.0, 3.0], 2).is_err());
    }
}
