//! Probability transducers for classifier outputs.
//!
//! A transducer is a posterior over the long-run joint distribution of
//! (true class, classifier output), represented by samples of a Gaussian
//! mixture with per-component class probabilities. It turns a raw output
//! into class probabilities, which are combined with a utility matrix to
//! pick the decision of maximal expected utility.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod calibrate;
pub mod data;
pub mod decide;
pub mod error;
pub mod evaluate;
pub mod math;
pub mod model;
pub mod oracle;

pub use calibrate::{fit, PriorSpec, SamplerConfig};
pub use data::{CalibrationRecord, CalibrationSet, DataSummary};
pub use decide::{choose, TieRule, UtilityMatrix};
pub use error::{Error, Result};
pub use model::{
    ClassProbabilityVector, ConditionalMode, FrequencySample, MixtureComponent, PrevalenceVector, TransducerModel,
};
