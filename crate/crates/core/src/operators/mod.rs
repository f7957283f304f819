//! Discrete `(−Δ)^m` under Dirichlet or Navier conditions.
//!
//! The Laplacian is a finite-volume stencil `A = W⁻¹K` with `K` symmetric and
//! `W` the quadrature weights, so `A` is self-adjoint in the weighted inner
//! product. Navier powers are literal compositions of `A`. The clamped
//! biharmonic uses `K₂ = Lᵀ W L`, where `L` is the Laplacian at every node
//! with reflection ghosts carrying `∂u/∂ν = 0`.

mod band;
mod domain;
mod field;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use band::{BandLu, BandMatrix};
pub use domain::{unit_sphere_area, BoundaryPoint, DomainSpec, Grid, MIN_RESOLUTION};
pub use field::{sup_norm, GridField};

use crate::error::{invalid, Error, Result};
use crate::quad::{neumaier_sum, Neumaier};
use field::ensure_same;

/// Tolerance used when checking that a sampled function meets the boundary
/// conditions.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCondition {
    /// `u = ∂u/∂ν = … = ∂^{m−1}u/∂ν^{m−1} = 0`.
    Dirichlet,
    /// `u = Δu = … = Δ^{m−1}u = 0`.
    Navier,
}

#[derive(Clone, Debug)]
pub struct PolyharmonicOperator {
    grid: Arc<Grid>,
    order: u32,
    bc: BoundaryCondition,
    k1: BandMatrix,
    k1_lu: BandLu,
    clamped: Option<(BandMatrix, BandLu)>,
}

/// Smallest eigenvalue and its eigenvector, normalized to `form(w₀) = 1` and
/// positive weighted mean.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub lambda1: f64,
    pub w0: GridField,
    pub iterations: usize,
}

/// Boundary samples of `|D^m u|` with their surface weights.
#[derive(Clone, Debug)]
pub struct BoundaryTrace {
    pub points: Vec<BoundaryPoint>,
    pub values: Vec<f64>,
}

impl BoundaryTrace {
    /// `∫_∂Ω h(x, ν)·|D^m u|² ds`.
    pub fn integrate_squared(&self, h: impl Fn(&BoundaryPoint) -> f64) -> f64 {
        neumaier_sum(
            self.points
                .iter()
                .zip(&self.values)
                .map(|(p, v)| p.weight * h(p) * v * v),
        )
    }
}

impl PolyharmonicOperator {
    pub fn build(domain: DomainSpec, order: u32, bc: BoundaryCondition) -> Result<Self> {
        Self::on_grid(Arc::new(Grid::new(domain)?), order, bc)
    }

    pub fn on_grid(grid: Arc<Grid>, order: u32, bc: BoundaryCondition) -> Result<Self> {
        if order == 0 {
            return invalid("operator order must be at least 1");
        }
        if bc == BoundaryCondition::Dirichlet && order > 2 {
            return Err(Error::Unsupported(format!(
                "Dirichlet supported for m ≤ 2 (got m = {order})"
            )));
        }
        let n = grid.len();
        let mut k1 = BandMatrix::zeros(n, grid.bandwidth);
        for e in &grid.edges {
            k1.add(e.i, e.i, e.c);
            if let Some(j) = e.j {
                k1.add(j, j, e.c);
                k1.add(e.i, j, -e.c);
                k1.add(j, e.i, -e.c);
            }
        }
        let k1_lu = k1.factor()?;
        let clamped = if bc == BoundaryCondition::Dirichlet && order == 2 {
            let mut k2 = BandMatrix::zeros(n, 2 * grid.bandwidth);
            for row in &grid.clamped_rows {
                for &(a, ca) in &row.entries {
                    for &(b, cb) in &row.entries {
                        k2.add(a, b, row.weight * ca * cb);
                    }
                }
            }
            let lu = k2.factor()?;
            Some((k2, lu))
        } else {
            None
        };
        Ok(PolyharmonicOperator {
            grid,
            order,
            bc,
            k1,
            k1_lu,
            clamped,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn field(&self, values: Vec<f64>) -> Result<GridField> {
        GridField::new(self.grid.clone(), values)
    }

    fn lap(&self, u: &[f64]) -> Vec<f64> {
        let w = self.grid.weights();
        self.k1
            .matvec(u)
            .into_iter()
            .zip(w)
            .map(|(v, w)| v / w)
            .collect()
    }

    fn apply_raw(&self, u: &[f64]) -> Vec<f64> {
        if let Some((k2, _)) = &self.clamped {
            let w = self.grid.weights();
            return k2
                .matvec(u)
                .into_iter()
                .zip(w)
                .map(|(v, w)| v / w)
                .collect();
        }
        let mut v = u.to_vec();
        for _ in 0..self.order {
            v = self.lap(&v);
        }
        v
    }

    fn solve_raw(&self, rhs: &[f64]) -> Vec<f64> {
        let w = self.grid.weights();
        let weighted = |x: &[f64]| -> Vec<f64> { x.iter().zip(w).map(|(a, b)| a * b).collect() };
        if let Some((_, lu)) = &self.clamped {
            return lu.solve(&weighted(rhs));
        }
        let mut x = rhs.to_vec();
        for _ in 0..self.order {
            x = self.k1_lu.solve(&weighted(&x));
        }
        x
    }

    fn form1(&self, u: &[f64]) -> f64 {
        let mut acc = Neumaier::new();
        for e in &self.grid.edges {
            let d = match e.j {
                Some(j) => u[e.i] - u[j],
                None => u[e.i],
            };
            acc.add(e.c * d * d);
        }
        acc.value()
    }

    fn form_raw(&self, u: &[f64]) -> f64 {
        if self.clamped.is_some() {
            let mut acc = Neumaier::new();
            for row in &self.grid.clamped_rows {
                let l = neumaier_sum(row.entries.iter().map(|&(j, c)| c * u[j]));
                acc.add(row.weight * l * l);
            }
            return acc.value();
        }
        let mut v = u.to_vec();
        for _ in 0..self.order / 2 {
            v = self.lap(&v);
        }
        if self.order.is_multiple_of(2) {
            let w = self.grid.weights();
            neumaier_sum(v.iter().zip(w).map(|(a, b)| b * a * a))
        } else {
            self.form1(&v)
        }
    }

    fn check(&self, u: &GridField) -> Result<()> {
        ensure_same(&self.grid, u.grid())
    }

    /// `(−Δ)^m u` at the interior nodes.
    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        self.check(u)?;
        self.field(self.apply_raw(u.values()))
    }

    /// Solves `(−Δ)^m x = rhs` with the operator's boundary conditions.
    pub fn solve(&self, rhs: &GridField) -> Result<GridField> {
        self.check(rhs)?;
        self.field(self.solve_raw(rhs.values()))
    }

    /// Discrete `∫|D^m u|²`, accumulated as a compensated sum of squares.
    pub fn form(&self, u: &GridField) -> Result<f64> {
        self.check(u)?;
        Ok(self.form_raw(u.values()))
    }

    /// The bilinear form `∫ D^m u · D^m v`.
    pub fn inner(&self, u: &GridField, v: &GridField) -> Result<f64> {
        self.check(u)?;
        let av = self.apply(v)?;
        u.dot(&av)
    }

    pub(crate) fn form_values(&self, u: &[f64]) -> f64 {
        self.form_raw(u)
    }

    pub(crate) fn solve_values(&self, rhs: &[f64]) -> Vec<f64> {
        self.solve_raw(rhs)
    }

    /// Inverse power iteration on the weighted eigenproblem.
    pub fn principal_eigenpair(&self) -> Result<Eigenpair> {
        const TOL: f64 = 1e-10;
        const MAX_ITER: usize = 10_000;
        let w = self.grid.weights();
        let wnorm = |x: &[f64]| neumaier_sum(x.iter().zip(w).map(|(a, b)| b * a * a)).sqrt();
        let mut x = vec![1.0; self.grid.len()];
        let n0 = wnorm(&x);
        x.iter_mut().for_each(|v| *v /= n0);
        let mut lambda = self.form_raw(&x);
        for it in 1..=MAX_ITER {
            let mut y = self.solve_raw(&x);
            let ny = wnorm(&y);
            y.iter_mut().for_each(|v| *v /= ny);
            let next = self.form_raw(&y);
            x = y;
            if (next - lambda).abs() <= TOL * next.abs() {
                let mean = neumaier_sum(x.iter().zip(w).map(|(a, b)| a * b));
                let scale = mean.signum() / self.form_raw(&x).sqrt();
                let w0 = self.field(x.iter().map(|v| v * scale).collect())?;
                return Ok(Eigenpair {
                    lambda1: next,
                    w0,
                    iterations: it,
                });
            }
            lambda = next;
        }
        Err(Error::Numerical(format!(
            "inverse iteration did not converge in {MAX_ITER} steps"
        )))
    }

    /// Boundary samples of `|D^m u|`: the normal derivative for `m = 1`,
    /// `|Δu|` for the clamped biharmonic. Both use one-sided differences
    /// exact for quadratics in the normal distance.
    pub fn boundary_trace(&self, u: &GridField) -> Result<BoundaryTrace> {
        self.check(u)?;
        let clamped = self.clamped.is_some();
        if self.order > 1 && !clamped {
            return Err(Error::Unsupported(
                "boundary trace of D^m u is available for m = 1 and Dirichlet m = 2".into(),
            ));
        }
        let vals = u.values();
        let at = |k: Option<usize>| k.map_or(0.0, |k| vals[k]);
        let points = self.grid.boundary().to_vec();
        let values = points
            .iter()
            .map(|p| {
                let (u1, u2) = (at(p.inward[0]), at(p.inward[1]));
                if clamped {
                    ((8.0 * u1 - u2) / (2.0 * p.h * p.h)).abs()
                } else {
                    ((4.0 * u1 - u2) / (2.0 * p.h)).abs()
                }
            })
            .collect();
        Ok(BoundaryTrace { points, values })
    }

    /// Samples `f` at the interior nodes after checking the boundary
    /// conditions at every boundary node. Ball closures receive `[r]`.
    ///
    /// Normal derivatives and Laplacians of `f` are taken by Richardson
    /// extrapolated central differences. For Navier `m ≥ 3` only `u` and
    /// `Δu` are checked.
    pub fn sample_checked(&self, f: impl Fn(&[f64]) -> f64) -> Result<GridField> {
        let k = self.grid.coord_len();
        let eval = |x: [f64; 2]| f(&x[..k]);
        for (idx, x) in self.grid.boundary_nodes().iter().enumerate() {
            let v = eval(*x);
            if !(v.abs() <= BOUNDARY_TOL) {
                return invalid(format!(
                    "u = {v:e} at boundary point {:?} violates u = 0",
                    &x[..k]
                ));
            }
            if self.order < 2 {
                continue;
            }
            let check = match self.bc {
                BoundaryCondition::Dirichlet => {
                    let normal = self.boundary_normal(idx, x);
                    normal.map(|nv| ("∂u/∂ν", directional_derivative(&eval, *x, nv)))
                }
                BoundaryCondition::Navier => Some(("Δu", self.fd_laplacian(&eval, *x))),
            };
            if let Some((name, d)) = check {
                if !(d.abs() <= BOUNDARY_TOL) {
                    return invalid(format!(
                        "{name} = {d:e} at boundary point {:?} violates the boundary condition",
                        &x[..k]
                    ));
                }
            }
        }
        let values = self.grid.sample(&f);
        self.field(values)
    }

    fn boundary_normal(&self, idx: usize, x: &[f64; 2]) -> Option<[f64; 2]> {
        match self.grid.spec() {
            DomainSpec::Rectangle { lx, ly, .. } => {
                let on_x = x[0] == 0.0 || x[0] == *lx;
                let on_y = x[1] == 0.0 || x[1] == *ly;
                if on_x && on_y {
                    None
                } else {
                    Some(self.grid.boundary()[idx].normal)
                }
            }
            _ => Some(self.grid.boundary()[idx].normal),
        }
    }

    fn fd_laplacian(&self, eval: &impl Fn([f64; 2]) -> f64, x: [f64; 2]) -> f64 {
        let second = |dir: [f64; 2]| {
            richardson(
                |h| {
                    let p = [x[0] + h * dir[0], x[1] + h * dir[1]];
                    let m = [x[0] - h * dir[0], x[1] - h * dir[1]];
                    (eval(p) - 2.0 * eval(x) + eval(m)) / (h * h)
                },
                1e-2,
            )
        };
        match self.grid.spec() {
            DomainSpec::Interval { .. } => second([1.0, 0.0]),
            DomainSpec::Rectangle { .. } => second([1.0, 0.0]) + second([0.0, 1.0]),
            DomainSpec::Ball { dim, .. } => {
                let d1 = directional_derivative(eval, x, [1.0, 0.0]);
                second([1.0, 0.0]) + (*dim as f64 - 1.0) / x[0] * d1
            }
        }
    }
}

fn richardson(d: impl Fn(f64) -> f64, h: f64) -> f64 {
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn directional_derivative(eval: &impl Fn([f64; 2]) -> f64, x: [f64; 2], dir: [f64; 2]) -> f64 {
    richardson(
        |h| {
            let p = [x[0] + h * dir[0], x[1] + h * dir[1]];
            let m = [x[0] - h * dir[0], x[1] - h * dir[1]];
            (eval(p) - eval(m)) / (2.0 * h)
        },
        1e-3,
    )
}
