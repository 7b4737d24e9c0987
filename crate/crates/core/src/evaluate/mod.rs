//! Scoring: confusion matrices and utility yields on labelled data,
//! grid-integrated algorithm utility, and curve-variability bands.

mod algorithm;
mod band;
mod confusion;
mod grid;
mod sweep;

pub use algorithm::{
    algorithm_expected_utility, evaluate_algorithm, grid_coverage, grid_posteriors, long_run_utility_distribution,
    prob_superior, sample_grid_posteriors, sample_long_run_utility, AlgorithmEvaluation, GridEvaluation,
};
pub use band::{
    pooled_curve_value, sample_curve_value, variability_band, CurveKind, QuantileBand, DEFAULT_QUANTILES,
    MIN_RELIABLE_SAMPLES,
};
pub use confusion::{
    accumulate_confusion, achievable_bounds, raw_argmax_decision, rescaled_yield, utility_yield, Bounds,
    ConfusionMatrix,
};
pub use grid::{GridAxis, OutputGrid, DEFAULT_GRID_CELLS, REQUIRED_COVERAGE};
pub use sweep::{decisions_rescaled_yield, utility_max_rescaled_yield, utility_sweep, SweepInput, SweepRow};
