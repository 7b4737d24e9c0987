use alloc::vec::Vec;

use super::confusion::{accumulate_confusion, achievable_bounds, rescaled_yield, utility_yield};
use crate::decide::{choose, TieRule, UtilityMatrix};
use crate::error::{Error, Result};
use crate::model::ClassProbabilityVector;

/// Rescaled yields of several decision methods under one utility matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub utility: UtilityMatrix,
    /// Rescaled yield of the fixed baseline decisions.
    pub baseline: f64,
    /// Rescaled yield of utility maximization, one per probability set.
    pub augmented: Vec<f64>,
}

/// Labelled records scored by a fixed baseline and by maximum expected
/// utility under one or more sets of class probabilities.
#[derive(Debug, Clone)]
pub struct SweepInput {
    pub truths: Vec<usize>,
    /// Baseline decision set per record (two entries for a tie).
    pub baseline: Vec<Vec<usize>>,
    /// One probability vector per record, for each method.
    pub probabilities: Vec<Vec<ClassProbabilityVector>>,
    pub n_classes: usize,
}

impl SweepInput {
    fn validate(&self) -> Result<()> {
        let n = self.truths.len();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if self.baseline.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.baseline.len(),
            });
        }
        for set in &self.probabilities {
            if set.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: set.len(),
                });
            }
        }
        Ok(())
    }
}

/// Rescaled yield of maximum expected utility with ties split in half.
pub fn utility_max_rescaled_yield(
    u: &UtilityMatrix,
    probabilities: &[ClassProbabilityVector],
    truths: &[usize],
    n_classes: usize,
) -> Result<f64> {
    let decisions = probabilities
        .iter()
        .map(|p| Ok(choose(u, p, TieRule::SplitHalf)?.chosen))
        .collect::<Result<Vec<_>>>()?;
    decisions_rescaled_yield(u, &decisions, truths, n_classes)
}

/// Rescaled yield of given decision sets on labelled records.
pub fn decisions_rescaled_yield(
    u: &UtilityMatrix,
    decisions: &[Vec<usize>],
    truths: &[usize],
    n_classes: usize,
) -> Result<f64> {
    let cm = accumulate_confusion(decisions, truths, u.n_decisions(), n_classes)?;
    let bounds = achievable_bounds(u, &cm.class_totals())?;
    rescaled_yield(utility_yield(u, &cm)?, bounds)
}

/// Scores every method under each utility matrix.
pub fn utility_sweep(input: &SweepInput, matrices: &[UtilityMatrix]) -> Result<Vec<SweepRow>> {
    input.validate()?;
    matrices
        .iter()
        .map(|u| {
            let baseline = decisions_rescaled_yield(u, &input.baseline, &input.truths, input.n_classes)?;
            let augmented = input
                .probabilities
                .iter()
                .map(|set| utility_max_rescaled_yield(u, set, &input.truths, input.n_classes))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRow {
                utility: u.clone(),
                baseline,
                augmented,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decide::sample_utility_space;
    use alloc::vec;

    fn p(p1: f64) -> ClassProbabilityVector {
        ClassProbabilityVector::new(vec![1.0 - p1, p1]).unwrap()
    }

    #[test]
    fn perfect_probabilities_reach_one() {
        let truths = vec![0, 1, 1, 0, 0];
        let input = SweepInput {
            truths: truths.clone(),
            baseline: vec![vec![0]; 5],
            probabilities: vec![truths.iter().map(|&c| p(c as f64)).collect()],
            n_classes: 2,
        };
        let rows = utility_sweep(&input, &sample_utility_space(50, 3)).unwrap();
        for r in rows {
            assert!((r.augmented[0] - 1.0).abs() < 1e-12);
            assert!(r.baseline <= 1.0 && r.baseline >= 0.0);
        }
    }

    #[test]
    fn length_mismatch() {
        let input = SweepInput {
            truths: vec![0, 1],
            baseline: vec![vec![0]],
            probabilities: vec![],
            n_classes: 2,
        };
        assert!(utility_sweep(&input, &sample_utility_space(1, 0)).is_err());
    }
}
