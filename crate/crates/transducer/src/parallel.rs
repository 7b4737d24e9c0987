//! Multi-threaded drivers over the core algorithms. Results are collected
//! in index order, so they match the sequential versions bit for bit.

use rayon::prelude::*;
use transducer_core::calibrate::{FitResult, PreparedFit};
use transducer_core::evaluate::{grid_coverage, sample_long_run_utility, OutputGrid};
use transducer_core::model::ConditionalMode;
use transducer_core::{
    CalibrationSet, ClassProbabilityVector, PrevalenceVector, Result, SamplerConfig, TransducerModel, UtilityMatrix,
};

/// Runs the chains on the rayon pool and assembles them in chain order.
pub fn fit_parallel(data: &CalibrationSet, config: &SamplerConfig) -> Result<FitResult> {
    let prepared = PreparedFit::new(data, config)?;
    fit_prepared(&prepared)
}

pub fn fit_prepared(prepared: &PreparedFit) -> Result<FitResult> {
    let outputs = (0..prepared.config().chains)
        .into_par_iter()
        .map(|chain| prepared.run_chain(chain))
        .collect();
    prepared.assemble(outputs)
}

/// Per-sample long-run utilities, one task per posterior sample.
pub fn long_run_parallel(model: &TransducerModel, u: &UtilityMatrix, grid: &OutputGrid) -> Result<Vec<f64>> {
    grid_coverage(model, grid)?;
    (0..model.n_samples())
        .into_par_iter()
        .map(|t| sample_long_run_utility(model, t, u, grid))
        .collect()
}

/// Class probabilities for many outputs.
pub fn probabilities_parallel(
    model: &TransducerModel,
    outputs: &[Vec<f64>],
    mode: ConditionalMode,
    prevalence: Option<&PrevalenceVector>,
) -> Result<Vec<ClassProbabilityVector>> {
    outputs
        .par_iter()
        .map(|y| model.class_probabilities(y, mode, prevalence))
        .collect()
}
