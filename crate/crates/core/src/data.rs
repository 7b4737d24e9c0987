//! Calibration data: pairs of true class and raw classifier output.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// One held-out item: its true class and the classifier's raw output.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub class_label: usize,
    pub output: Vec<f64>,
}

impl CalibrationRecord {
    pub fn new(class_label: usize, output: Vec<f64>) -> Self {
        Self { class_label, output }
    }
}

/// Validated set of calibration records sharing one output dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    records: Vec<CalibrationRecord>,
    n_classes: usize,
    y_dim: usize,
    class_counts: Vec<usize>,
}

impl CalibrationSet {
    pub fn new(records: Vec<CalibrationRecord>, n_classes: usize, y_dim: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidConfig("at least two classes are required".into()));
        }
        if y_dim == 0 {
            return Err(Error::InvalidConfig("output dimension must be at least 1".into()));
        }
        let mut class_counts = vec![0usize; n_classes];
        for r in &records {
            if r.class_label >= n_classes {
                return Err(Error::ClassOutOfRange {
                    label: r.class_label,
                    n_classes,
                });
            }
            if r.output.len() != y_dim {
                return Err(Error::DimensionMismatch {
                    expected: y_dim,
                    found: r.output.len(),
                });
            }
            if r.output.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
            class_counts[r.class_label] += 1;
        }
        Ok(Self {
            records,
            n_classes,
            y_dim,
            class_counts,
        })
    }

    /// Builds a set inferring the class count (at least 2) and the output
    /// dimension from the records.
    pub fn from_records(records: Vec<CalibrationRecord>) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyData)?;
        let y_dim = first.output.len();
        let n_classes = records.iter().map(|r| r.class_label + 1).max().unwrap_or(2).max(2);
        Self::new(records, n_classes, y_dim)
    }

    pub fn records(&self) -> &[CalibrationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn empirical_class_freq(&self) -> Vec<f64> {
        let m = self.len() as f64;
        self.class_counts.iter().map(|&n| n as f64 / m).collect()
    }

    pub fn summary(&self) -> Result<DataSummary> {
        DataSummary::of(self)
    }
}

/// Per-dimension range and spread of the outputs, kept with a fitted model
/// so that integration grids can be built without the data.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSummary {
    pub n_records: usize,
    pub class_counts: Vec<usize>,
    pub y_min: Vec<f64>,
    pub y_max: Vec<f64>,
    pub y_mean: Vec<f64>,
    /// Population variance per dimension.
    pub y_var: Vec<f64>,
}

impl DataSummary {
    pub fn of(data: &CalibrationSet) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let d = data.y_dim();
        let m = data.len() as f64;
        let mut y_min = vec![f64::INFINITY; d];
        let mut y_max = vec![f64::NEG_INFINITY; d];
        let mut y_mean = vec![0.0; d];
        for r in data.records() {
            for (j, &v) in r.output.iter().enumerate() {
                y_min[j] = y_min[j].min(v);
                y_max[j] = y_max[j].max(v);
                y_mean[j] += v;
            }
        }
        for v in &mut y_mean {
            *v /= m;
        }
        let mut y_var = vec![0.0; d];
        for r in data.records() {
            for (j, &v) in r.output.iter().enumerate() {
                y_var[j] += (v - y_mean[j]) * (v - y_mean[j]);
            }
        }
        for v in &mut y_var {
            *v /= m;
        }
        Ok(Self {
            n_records: data.len(),
            class_counts: data.class_counts().to_vec(),
            y_min,
            y_max,
            y_mean,
            y_var,
        })
    }

    pub fn y_sd(&self) -> Vec<f64> {
        self.y_var.iter().map(|&v| math::sqrt(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(c: usize, y: f64) -> CalibrationRecord {
        CalibrationRecord::new(c, vec![y])
    }

    #[test]
    fn counts_and_frequencies() {
        let set = CalibrationSet::new(vec![rec(0, 0.1), rec(1, 0.9), rec(0, 0.2)], 2, 1).unwrap();
        assert_eq!(set.class_counts(), &[2, 1]);
        let f = set.empirical_class_freq();
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((f[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_records() {
        assert_eq!(
            CalibrationSet::new(vec![rec(2, 0.1)], 2, 1),
            Err(Error::ClassOutOfRange { label: 2, n_classes: 2 })
        );
        assert!(matches!(
            CalibrationSet::new(vec![CalibrationRecord::new(0, vec![0.1, 0.2])], 2, 1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(CalibrationSet::new(vec![rec(0, f64::NAN)], 2, 1), Err(Error::NonFinite));
        assert!(CalibrationSet::new(vec![], 1, 1).is_err());
    }

    #[test]
    fn absent_class_is_allowed() {
        let set = CalibrationSet::new(vec![rec(0, 0.3)], 3, 1).unwrap();
        assert_eq!(set.class_counts(), &[1, 0, 0]);
    }

    #[test]
    fn summary_statistics() {
        let set = CalibrationSet::from_records(vec![rec(0, 1.0), rec(1, 3.0)]).unwrap();
        let s = set.summary().unwrap();
        assert_eq!(s.y_min, vec![1.0]);
        assert_eq!(s.y_max, vec![3.0]);
        assert_eq!(s.y_mean, vec![2.0]);
        assert_eq!(s.y_var, vec![1.0]);
    }
}
