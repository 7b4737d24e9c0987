//! Algorithm-level expected utility: integrate the best achievable
//! expected utility over the output distribution, either under the pooled
//! posterior or under each posterior sample separately.

use alloc::vec::Vec;

use super::grid::{OutputGrid, REQUIRED_COVERAGE};
use crate::decide::{choose, TieRule, UtilityMatrix};
use crate::error::{Error, Result};
use crate::math;
use crate::model::{ClassProbabilityVector, TransducerModel};

/// Cell masses and class probabilities over a grid.
#[derive(Debug, Clone)]
pub struct GridEvaluation {
    pub masses: Vec<f64>,
    pub probabilities: Vec<ClassProbabilityVector>,
}

impl GridEvaluation {
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Mass-weighted expected utility of a fixed decision per cell,
    /// normalized by the grid mass.
    pub fn policy_utility(&self, u: &UtilityMatrix, policy: &[usize]) -> Result<f64> {
        if policy.len() != self.masses.len() {
            return Err(Error::DimensionMismatch {
                expected: self.masses.len(),
                found: policy.len(),
            });
        }
        let mut acc = 0.0;
        for ((&m, p), &i) in self.masses.iter().zip(&self.probabilities).zip(policy) {
            if i >= u.n_decisions() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: u.n_decisions(),
                });
            }
            let eu: f64 = u.row(i).iter().zip(p.as_slice()).map(|(a, b)| a * b).sum();
            acc += m * eu;
        }
        Ok(acc / self.total_mass())
    }

    /// Maximum-expected-utility decision per cell (lowest index on ties).
    pub fn optimal_policy(&self, u: &UtilityMatrix) -> Result<Vec<usize>> {
        self.probabilities
            .iter()
            .map(|p| Ok(choose(u, p, TieRule::ReportTie)?.decision()))
            .collect()
    }

    /// Σ mass · max_i Σ_c U_ic p_c, normalized by the grid mass.
    pub fn optimal_utility(&self, u: &UtilityMatrix) -> Result<f64> {
        let total = self.total_mass();
        if !(total > 0.0) {
            return Err(Error::InsufficientCoverage {
                attained: total,
                required: REQUIRED_COVERAGE,
            });
        }
        let mut acc = 0.0;
        for (&m, p) in self.masses.iter().zip(&self.probabilities) {
            let eu = choose(u, p, TieRule::ReportTie)?.expected_utilities;
            acc += m * eu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        Ok(acc / total)
    }
}

fn check_grid(model: &TransducerModel, grid: &OutputGrid) -> Result<()> {
    if grid.dim() != model.y_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.y_dim(),
            found: grid.dim(),
        });
    }
    Ok(())
}

fn check_utility(model: &TransducerModel, u: &UtilityMatrix) -> Result<()> {
    if u.n_classes() != model.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: model.n_classes(),
            found: u.n_classes(),
        });
    }
    Ok(())
}

/// Pooled masses and exchangeable class probabilities at every cell;
/// fails when the grid misses more than 0.1% of the output mass.
pub fn grid_posteriors(model: &TransducerModel, grid: &OutputGrid) -> Result<GridEvaluation> {
    check_grid(model, grid)?;
    let eval = evaluate_cells(grid, |y| model.posterior(y))?;
    let attained = eval.total_mass();
    if !(attained >= REQUIRED_COVERAGE) {
        return Err(Error::InsufficientCoverage {
            attained,
            required: REQUIRED_COVERAGE,
        });
    }
    Ok(eval)
}

/// Masses and class probabilities under posterior sample `t` alone. No
/// coverage requirement applies to individual samples.
pub fn sample_grid_posteriors(model: &TransducerModel, t: usize, grid: &OutputGrid) -> Result<GridEvaluation> {
    check_grid(model, grid)?;
    evaluate_cells(grid, |y| model.sample_posterior(t, y))
}

fn evaluate_cells<F>(grid: &OutputGrid, mut at: F) -> Result<GridEvaluation>
where
    F: FnMut(&[f64]) -> Result<crate::model::OutputPosterior>,
{
    let vol = grid.cell_volume();
    let n = grid.n_cells();
    let mut masses = Vec::with_capacity(n);
    let mut probabilities = Vec::with_capacity(n);
    let mut y = alloc::vec![0.0; grid.dim()];
    for i in 0..n {
        grid.center(i, &mut y);
        let post = at(&y)?;
        masses.push(math::exp(post.ln_density) * vol);
        probabilities.push(post.probabilities);
    }
    Ok(GridEvaluation { masses, probabilities })
}

/// Expected utility of using the transducer with utilities `u`.
pub fn algorithm_expected_utility(model: &TransducerModel, u: &UtilityMatrix, grid: &OutputGrid) -> Result<f64> {
    check_utility(model, u)?;
    grid_posteriors(model, grid)?.optimal_utility(u)
}

/// Long-run utility under posterior sample `t`.
pub fn sample_long_run_utility(model: &TransducerModel, t: usize, u: &UtilityMatrix, grid: &OutputGrid) -> Result<f64> {
    check_utility(model, u)?;
    sample_grid_posteriors(model, t, grid)?.optimal_utility(u)
}

/// One long-run utility per posterior sample, in sample order. The grid
/// must cover the pooled output mass.
pub fn long_run_utility_distribution(
    model: &TransducerModel,
    u: &UtilityMatrix,
    grid: &OutputGrid,
) -> Result<Vec<f64>> {
    check_utility(model, u)?;
    grid_coverage(model, grid)?;
    (0..model.n_samples())
        .map(|t| sample_long_run_utility(model, t, u, grid))
        .collect()
}

/// Pooled output mass captured by the grid; errors below the requirement.
pub fn grid_coverage(model: &TransducerModel, grid: &OutputGrid) -> Result<f64> {
    check_grid(model, grid)?;
    let vol = grid.cell_volume();
    let mut y = alloc::vec![0.0; grid.dim()];
    let mut total = 0.0;
    for i in 0..grid.n_cells() {
        grid.center(i, &mut y);
        total += math::exp(model.ln_marginal_output(&y)?) * vol;
    }
    if !(total >= REQUIRED_COVERAGE) {
        return Err(Error::InsufficientCoverage {
            attained: total,
            required: REQUIRED_COVERAGE,
        });
    }
    Ok(total)
}

/// Expected utility plus its per-sample long-run distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmEvaluation {
    pub expected_utility: f64,
    pub long_run_samples: Vec<f64>,
    pub grid: OutputGrid,
}

pub fn evaluate_algorithm(
    model: &TransducerModel,
    u: &UtilityMatrix,
    grid: &OutputGrid,
) -> Result<AlgorithmEvaluation> {
    Ok(AlgorithmEvaluation {
        expected_utility: algorithm_expected_utility(model, u, grid)?,
        long_run_samples: long_run_utility_distribution(model, u, grid)?,
        grid: grid.clone(),
    })
}

/// P(u_a > u_b) for independent draws from the two sample sets, counting
/// ties as one half; exact over all ordered pairs.
pub fn prob_superior(u_a: &[f64], u_b: &[f64]) -> Result<f64> {
    if u_a.is_empty() || u_b.is_empty() {
        return Err(Error::InvalidConfig("superiority needs non-empty sample sets".into()));
    }
    let mut sorted_b = u_b.to_vec();
    math::sort_floats(&mut sorted_b);
    // twice the count: 2 per win, 1 per tie
    let mut doubled: u128 = 0;
    for &a in u_a {
        let below = sorted_b.partition_point(|&b| b < a);
        let not_above = sorted_b.partition_point(|&b| b <= a);
        doubled += 2 * below as u128 + (not_above - below) as u128;
    }
    let denom = 2 * u_a.len() as u128 * u_b.len() as u128;
    // The complement is formed from the smaller half so that
    // prob_superior(a, b) + prob_superior(b, a) == 1 exactly.
    Ok(if 2 * doubled <= denom {
        doubled as f64 / denom as f64
    } else {
        1.0 - (denom - doubled) as f64 / denom as f64
    })
}
