use alloc::vec::Vec;

use crate::data::DataSummary;
use crate::error::{Error, Result};
use crate::math;
use crate::model::TransducerModel;

/// Default cells per output dimension.
pub const DEFAULT_GRID_CELLS: usize = 512;

/// Fraction of the pooled output mass a grid must capture.
pub const REQUIRED_COVERAGE: f64 = 0.999;

/// Spread multiple added on both sides of the observed output range.
const MARGIN_SDS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl GridAxis {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }
}

/// Regular grid of cells over output space, midpoint rule.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrid {
    axes: Vec<GridAxis>,
}

impl OutputGrid {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one axis".into()));
        }
        for a in &axes {
            if a.cells == 0 || !(a.hi > a.lo) || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(Error::InvalidConfig("grid axes need cells >= 1 and lo < hi".into()));
            }
        }
        Ok(Self { axes })
    }

    /// `cells` per dimension over `[min − 3 sd, max + 3 sd]` of the data.
    pub fn from_summary(summary: &DataSummary, cells: usize) -> Result<Self> {
        let sd = summary.y_sd();
        let axes = (0..sd.len())
            .map(|j| {
                let spread = sd[j].max(1e-3);
                GridAxis {
                    lo: summary.y_min[j] - MARGIN_SDS * spread,
                    hi: summary.y_max[j] + MARGIN_SDS * spread,
                    cells,
                }
            })
            .collect();
        Self::new(axes)
    }

    /// Grid for a model: from its calibration-data summary when known,
    /// otherwise ±6 sd around the mean of its pooled output marginal.
    pub fn for_model(model: &TransducerModel, cells: usize) -> Result<Self> {
        if let Some(p) = model.provenance() {
            return Self::from_summary(&p.data, cells);
        }
        let d = model.y_dim();
        let t = model.n_samples() as f64;
        let mut mean = alloc::vec![0.0; d];
        let mut second = alloc::vec![0.0; d];
        for s in model.samples() {
            for comp in &s.components {
                let w = comp.weight / t;
                for j in 0..d {
                    mean[j] += w * comp.means[j];
                    second[j] += w * (comp.means[j] * comp.means[j] + comp.sds[j] * comp.sds[j]);
                }
            }
        }
        let axes = (0..d)
            .map(|j| {
                let sd = math::sqrt((second[j] - mean[j] * mean[j]).max(1e-12));
                GridAxis {
                    lo: mean[j] - 6.0 * sd,
                    hi: mean[j] + 6.0 * sd,
                    cells,
                }
            })
            .collect();
        Self::new(axes)
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|a| a.cells).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.width()).product()
    }

    /// The same ranges with `factor` times as many cells per axis.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            axes: self
                .axes
                .iter()
                .map(|a| GridAxis {
                    cells: a.cells * factor,
                    ..*a
                })
                .collect(),
        }
    }

    /// Center of cell `index`, last axis fastest.
    pub fn center(&self, index: usize, out: &mut [f64]) {
        let mut rem = index;
        for (j, a) in self.axes.iter().enumerate().rev() {
            out[j] = a.center(rem % a.cells);
            rem /= a.cells;
        }
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        let mut buf = alloc::vec![0.0; self.dim()];
        (0..self.n_cells())
            .map(|i| {
                self.center(i, &mut buf);
                buf.clone()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn centers_and_volume() {
        let g = OutputGrid::new(vec![
            GridAxis {
                lo: 0.0,
                hi: 1.0,
                cells: 2,
            },
            GridAxis {
                lo: 0.0,
                hi: 3.0,
                cells: 3,
            },
        ])
        .unwrap();
        assert_eq!(g.n_cells(), 6);
        assert!((g.cell_volume() - 0.5).abs() < 1e-15);
        let c = g.centers();
        assert_eq!(c[0], vec![0.25, 0.5]);
        assert_eq!(c[1], vec![0.25, 1.5]);
        assert_eq!(c[5], vec![0.75, 2.5]);
        assert_eq!(g.refined(10).n_cells(), 600);
    }

    #[test]
    fn rejects_empty_axes() {
        assert!(OutputGrid::new(vec![]).is_err());
        assert!(OutputGrid::new(vec![GridAxis {
            lo: 1.0,
            hi: 1.0,
            cells: 4
        }])
        .is_err());
        assert!(OutputGrid::new(vec![GridAxis {
            lo: 0.0,
            hi: 1.0,
            cells: 0
        }])
        .is_err());
    }
}
