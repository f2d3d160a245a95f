//! Predictive mean and variance over a regular grid of 2-D inputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::mc::{mc_predict, PredictiveSummary};
use crate::network::NetworkParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x_min: -1.2, x_max: 1.2, y_min: -1.2, y_max: 1.2, nx: 100, ny: 100 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::invalid("grid needs at least 2 points per axis"));
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) || ![self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("grid bounds must be finite and increasing"));
        }
        Ok(())
    }

    /// Evenly spaced, endpoints included.
    pub fn xs(&self) -> Vec<f64> {
        axis(self.x_min, self.x_max, self.nx)
    }

    pub fn ys(&self) -> Vec<f64> {
        axis(self.y_min, self.y_max, self.ny)
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldScan {
    pub grid: GridSpec,
    /// Row-major, `y` outer: cell `(ix, iy)` is at `iy * nx + ix`.
    pub cells: Vec<PredictiveSummary>,
    /// Class whose mean and variance the CSV exports report.
    pub class: usize,
}

/// `mc_predict` at every grid point; cell `i` draws from `rng.substream(i)`.
/// The exported class is 1 (the first fault class).
pub fn field_scan_2d(params: &NetworkParams, grid: &GridSpec, samples: usize, rng: &RngStream) -> Result<FieldScan> {
    if params.config.input_dim != 2 {
        return Err(Error::invalid(format!(
            "field scans need a 2-input model, got {} inputs",
            params.config.input_dim
        )));
    }
    grid.validate()?;
    let (xs, ys) = (grid.xs(), grid.ys());
    let cells = (0..grid.nx * grid.ny)
        .into_par_iter()
        .map(|i| {
            let p = [xs[i % grid.nx], ys[i / grid.nx]];
            mc_predict(params, &p, samples, &mut rng.substream(i as u64))
        })
        .collect::<Result<_>>()?;
    Ok(FieldScan { grid: *grid, cells, class: 1 })
}

impl FieldScan {
    pub fn cell(&self, ix: usize, iy: usize) -> &PredictiveSummary {
        &self.cells[iy * self.grid.nx + ix]
    }

    /// Points with their summaries.
    pub fn points(&self) -> impl Iterator<Item = ([f64; 2], &PredictiveSummary)> + '_ {
        let (xs, ys) = (self.grid.xs(), self.grid.ys());
        let nx = self.grid.nx;
        self.cells.iter().enumerate().map(move |(i, s)| ([xs[i % nx], ys[i / nx]], s))
    }

    pub fn mean(&self, ix: usize, iy: usize) -> f64 {
        self.cell(ix, iy).mean[self.class]
    }

    pub fn variance(&self, ix: usize, iy: usize) -> f64 {
        self.cell(ix, iy).variance[self.class]
    }

    /// Cells whose mean is within `tol` of 0.5.
    pub fn boundary_cells(&self, tol: f64) -> Vec<[f64; 2]> {
        self.points().filter(|(_, s)| (s.mean[self.class] - 0.5).abs() < tol).map(|(p, _)| p).collect()
    }

    /// Long format `x,y,mean_<c>,variance_<c>`.
    pub fn to_long_csv(&self) -> String {
        let c = self.class;
        let mut out = format!("x,y,mean_{c},variance_{c}\n");
        for (p, s) in self.points() {
            out.push_str(&format!("{},{},{},{}\n", p[0], p[1], s.mean[c], s.variance[c]));
        }
        out
    }

    fn matrix_csv(&self, value: impl Fn(&PredictiveSummary) -> f64) -> String {
        let mut out = String::from("y\\x");
        for x in self.grid.xs() {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
        for (iy, y) in self.grid.ys().into_iter().enumerate() {
            out.push_str(&y.to_string());
            for ix in 0..self.grid.nx {
                out.push_str(&format!(",{}", value(self.cell(ix, iy))));
            }
            out.push('\n');
        }
        out
    }

    /// `|mean − 0.5|` as a `ny × nx` matrix with axis labels.
    pub fn proximity_csv(&self) -> String {
        let c = self.class;
        self.matrix_csv(|s| (s.mean[c] - 0.5).abs())
    }

    pub fn variance_csv(&self) -> String {
        let c = self.class;
        self.matrix_csv(|s| s.variance[c])
    }

    /// Mean variance of the cells whose radius satisfies `in_region`.
    pub fn region_mean_variance(&self, in_region: impl Fn(f64) -> bool) -> Option<f64> {
        let vals: Vec<f64> = self
            .points()
            .filter(|(p, _)| in_region(p[0].hypot(p[1])))
            .map(|(_, s)| s.variance[self.class])
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}
