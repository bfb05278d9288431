//! Sampled correlation curves `G(δ₁)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::DetectorLayout;

/// `G^(M)` sampled on a grid of scan phases.
///
/// Monte Carlo curves also carry per-point standard errors and the per-batch
/// means they were derived from, so downstream fits can resample them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<DetectorLayout>,
    pub normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_means: Option<Vec<Vec<f64>>>,
}

impl CorrelationCurve {
    pub fn new(
        grid: Vec<f64>,
        values: Vec<f64>,
        order: usize,
        layout: Option<DetectorLayout>,
    ) -> Result<Self> {
        let curve = CorrelationCurve {
            grid,
            values,
            order,
            layout,
            normalized: false,
            stderr: None,
            batch_means: None,
        };
        curve.validate()?;
        Ok(curve)
    }

    /// Evaluate `f` on every grid point.
    pub fn tabulate<F>(
        grid: &[f64],
        order: usize,
        layout: Option<DetectorLayout>,
        mut f: F,
    ) -> Result<Self>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let values = grid.iter().map(|&d| f(d)).collect::<Result<Vec<_>>>()?;
        Self::new(grid.to_vec(), values, order, layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 2 {
            return invalid("a curve needs at least two grid points");
        }
        if self.grid.len() != self.values.len() {
            return invalid(format!(
                "grid has {} points but {} values were given",
                self.grid.len(),
                self.values.len()
            ));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("curve values must be finite and non-negative");
        }
        if let Some(se) = &self.stderr {
            if se.len() != self.grid.len() {
                return invalid("stderr length does not match the grid");
            }
        }
        if let Some(batches) = &self.batch_means {
            if batches.iter().any(|b| b.len() != self.grid.len()) {
                return invalid("batch mean length does not match the grid");
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Divide values, errors and batch means by `max G`.
    pub fn normalized(&self) -> Result<Self> {
        let max = self.max_value();
        if !(max > 0.0) {
            return invalid("cannot normalize a curve whose maximum is not positive");
        }
        let scale = |v: &Vec<f64>| v.iter().map(|x| x / max).collect::<Vec<_>>();
        Ok(CorrelationCurve {
            grid: self.grid.clone(),
            values: scale(&self.values),
            order: self.order,
            layout: self.layout.clone(),
            normalized: true,
            stderr: self.stderr.as_ref().map(scale),
            batch_means: self
                .batch_means
                .as_ref()
                .map(|b| b.iter().map(scale).collect()),
        })
    }
}
