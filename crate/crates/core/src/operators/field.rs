use std::io::Write;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::operators::domain::{DomainSpec, Grid};
use crate::quad::{neumaier_sum, weighted_sum};

/// Values at the interior nodes of a grid. Boundary values are zero by
/// construction.
#[derive(Clone, Debug)]
pub struct GridField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "field has {} values, grid has {} interior nodes",
                values.len(),
                grid.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!(
                "non-finite field value at node {i}"
            )));
        }
        Ok(GridField { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        GridField {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    /// `∫ u` with the grid quadrature.
    pub fn integrate(&self) -> f64 {
        weighted_sum(self.grid.weights(), &self.values, |u| u)
    }

    /// `∫ h(u)` with the grid quadrature.
    pub fn integrate_map(&self, h: impl Fn(f64) -> f64) -> f64 {
        weighted_sum(self.grid.weights(), &self.values, h)
    }

    /// `∫ u·v`; rejects fields on different grids.
    pub fn dot(&self, other: &GridField) -> Result<f64> {
        ensure_same(&self.grid, &other.grid)?;
        let w = self.grid.weights();
        Ok(neumaier_sum(
            (0..w.len()).map(|i| w[i] * self.values[i] * other.values[i]),
        ))
    }

    pub fn map(&self, h: impl Fn(f64) -> f64) -> GridField {
        GridField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&u| h(u)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> GridField {
        self.map(|u| c * u)
    }

    /// Writes coordinate columns followed by the value, in fixed scientific
    /// notation with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let cols = self.grid.coord_len();
        let names: &[&str] = match self.grid.spec() {
            DomainSpec::Interval { .. } => &["x", "u"],
            DomainSpec::Rectangle { .. } => &["x", "y", "u"],
            DomainSpec::Ball { .. } => &["r", "u"],
        };
        w.write_record(names)?;
        for (c, v) in self.grid.coords().iter().zip(&self.values) {
            let mut rec: Vec<String> = c[..cols].iter().map(|x| format!("{x:.16e}")).collect();
            rec.push(format!("{v:.16e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn ensure_same(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || (a.spec() == b.spec()) {
        Ok(())
    } else {
        invalid("fields live on different domains")
    }
}
