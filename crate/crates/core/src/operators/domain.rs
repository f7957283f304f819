//! Domains, their grids and the second-order Laplacian data built on them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Smallest admissible number of grid intervals per axis.
pub const MIN_RESOLUTION: usize = 16;

/// A computational domain and its resolution, given as grid intervals per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    /// `(0, length)`.
    Interval { length: f64, intervals: usize },
    /// `(0, lx) × (0, ly)`.
    Rectangle {
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
    },
    /// Radially symmetric functions on the ball of `radius` in `R^dim`.
    Ball {
        radius: f64,
        dim: u32,
        intervals: usize,
    },
}

impl DomainSpec {
    pub fn interval(length: f64, intervals: usize) -> Self {
        DomainSpec::Interval { length, intervals }
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Self {
        DomainSpec::Rectangle { lx, ly, nx, ny }
    }

    pub fn ball(radius: f64, dim: u32, intervals: usize) -> Self {
        DomainSpec::Ball {
            radius,
            dim,
            intervals,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_len = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                invalid(format!("{name} = {v} must be positive"))
            }
        };
        let check_res = |name: &str, n: usize| {
            if n >= MIN_RESOLUTION {
                Ok(())
            } else {
                invalid(format!(
                    "{name} = {n} is below the minimum of {MIN_RESOLUTION}"
                ))
            }
        };
        match *self {
            DomainSpec::Interval { length, intervals } => {
                check_len("length", length)?;
                check_res("intervals", intervals)
            }
            DomainSpec::Rectangle { lx, ly, nx, ny } => {
                check_len("lx", lx)?;
                check_len("ly", ly)?;
                check_res("nx", nx)?;
                check_res("ny", ny)
            }
            DomainSpec::Ball {
                radius,
                dim,
                intervals,
            } => {
                check_len("radius", radius)?;
                if dim < 2 {
                    return invalid(format!("ball dimension {dim} must be at least 2"));
                }
                check_res("intervals", intervals)
            }
        }
    }

    /// Spatial dimension of the domain the grid represents.
    pub fn spatial_dim(&self) -> u32 {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Rectangle { .. } => 2,
            DomainSpec::Ball { dim, .. } => *dim,
        }
    }
}

/// Surface measure of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: u32) -> f64 {
    use std::f64::consts::PI;
    let (mut area, start) = if n % 2 == 1 { (2.0, 1) } else { (2.0 * PI, 2) };
    let mut k = start;
    while k < n {
        area *= 2.0 * PI / k as f64;
        k += 2;
    }
    area
}

/// A boundary sample used by traces and star-shapedness checks.
///
/// For balls, `x` and `normal` are written in the plane `(r, 0)`; the single
/// point stands for the whole sphere through `weight`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub x: [f64; 2],
    pub normal: [f64; 2],
    pub weight: f64,
    /// Interior nodes at distances `h` and `2h` along the inward normal.
    pub inward: [Option<usize>; 2],
    /// Grid spacing along the normal.
    pub h: f64,
}

/// Coupling between an interior node and a neighbor; `j = None` is a
/// boundary neighbor where the field vanishes.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Edge {
    pub i: usize,
    pub j: Option<usize>,
    pub c: f64,
}

/// One node of the full grid carrying a `−Δ` row, with its quadrature weight.
#[derive(Clone, Debug)]
pub(crate) struct LapRow {
    pub weight: f64,
    pub entries: Vec<(usize, f64)>,
}

/// Grid geometry shared by all fields and operators on one domain.
#[derive(Clone, Debug)]
pub struct Grid {
    spec: DomainSpec,
    coords: Vec<[f64; 2]>,
    weights: Vec<f64>,
    boundary: Vec<BoundaryPoint>,
    boundary_nodes: Vec<[f64; 2]>,
    pub(crate) edges: Vec<Edge>,
    /// Rows of `−Δ` at every node, boundary included, with reflection ghosts
    /// that encode a vanishing normal derivative.
    pub(crate) clamped_rows: Vec<LapRow>,
    pub(crate) bandwidth: usize,
}

impl Grid {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        spec.validate()?;
        Ok(match spec {
            DomainSpec::Interval { length, intervals } => {
                interval_grid(spec.clone(), length, intervals)
            }
            DomainSpec::Rectangle { lx, ly, nx, ny } => {
                rectangle_grid(spec.clone(), lx, ly, nx, ny)
            }
            DomainSpec::Ball {
                radius,
                dim,
                intervals,
            } => ball_grid(spec.clone(), radius, dim, intervals),
        })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Node coordinates; one-dimensional and radial grids use the first slot.
    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Quadrature weights; radial grids include the `ω r^{N−1}` Jacobian.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundary(&self) -> &[BoundaryPoint] {
        &self.boundary
    }

    /// Every boundary node of the grid, used to check boundary conditions.
    pub fn boundary_nodes(&self) -> &[[f64; 2]] {
        &self.boundary_nodes
    }

    /// Number of coordinates a sampling closure receives.
    pub fn coord_len(&self) -> usize {
        match self.spec {
            DomainSpec::Rectangle { .. } => 2,
            _ => 1,
        }
    }

    /// Values of `f` at the interior nodes.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let k = self.coord_len();
        self.coords.iter().map(|c| f(&c[..k])).collect()
    }
}

fn interval_grid(spec: DomainSpec, length: f64, n: usize) -> Grid {
    let h = length / n as f64;
    let m = n - 1;
    let coords = (1..n).map(|i| [i as f64 * h, 0.0]).collect();
    let weights = vec![h; m];
    let mut edges = Vec::with_capacity(m + 1);
    edges.push(Edge {
        i: 0,
        j: None,
        c: 1.0 / h,
    });
    for i in 0..m - 1 {
        edges.push(Edge {
            i,
            j: Some(i + 1),
            c: 1.0 / h,
        });
    }
    edges.push(Edge {
        i: m - 1,
        j: None,
        c: 1.0 / h,
    });

    let mut clamped_rows = Vec::with_capacity(n + 1);
    let h2 = h * h;
    clamped_rows.push(LapRow {
        weight: h / 2.0,
        entries: vec![(0, -2.0 / h2)],
    });
    for i in 0..m {
        let mut entries = vec![(i, 2.0 / h2)];
        if i > 0 {
            entries.push((i - 1, -1.0 / h2));
        }
        if i + 1 < m {
            entries.push((i + 1, -1.0 / h2));
        }
        clamped_rows.push(LapRow { weight: h, entries });
    }
    clamped_rows.push(LapRow {
        weight: h / 2.0,
        entries: vec![(m - 1, -2.0 / h2)],
    });

    let boundary = vec![
        BoundaryPoint {
            x: [0.0, 0.0],
            normal: [-1.0, 0.0],
            weight: 1.0,
            inward: [Some(0), Some(1)],
            h,
        },
        BoundaryPoint {
            x: [length, 0.0],
            normal: [1.0, 0.0],
            weight: 1.0,
            inward: [Some(m - 1), Some(m - 2)],
            h,
        },
    ];
    Grid {
        spec,
        coords,
        weights,
        boundary_nodes: vec![[0.0, 0.0], [length, 0.0]],
        boundary,
        edges,
        clamped_rows,
        bandwidth: 1,
    }
}

fn ball_grid(spec: DomainSpec, radius: f64, dim: u32, n: usize) -> Grid {
    let h = radius / n as f64;
    let omega = unit_sphere_area(dim);
    let nd = dim as f64;
    let ball_vol = |r: f64| omega * r.powi(dim as i32) / nd;
    let flux = |r: f64| omega * r.powi(dim as i32 - 1) / h;

    let coords = (0..n).map(|i| [i as f64 * h, 0.0]).collect();
    let weights: Vec<f64> = (0..n)
        .map(|i| {
            let r = i as f64 * h;
            ball_vol(r + h / 2.0) - ball_vol((r - h / 2.0).max(0.0))
        })
        .collect();
    let mut edges = Vec::with_capacity(n);
    for i in 0..n - 1 {
        edges.push(Edge {
            i,
            j: Some(i + 1),
            c: flux((i as f64 + 0.5) * h),
        });
    }
    edges.push(Edge {
        i: n - 1,
        j: None,
        c: flux((n as f64 - 0.5) * h),
    });

    let mut clamped_rows = Vec::with_capacity(n + 1);
    for i in 0..n {
        let w = weights[i];
        let right = flux((i as f64 + 0.5) * h);
        let mut diag = right;
        let mut entries = Vec::with_capacity(3);
        if i > 0 {
            let left = flux((i as f64 - 0.5) * h);
            diag += left;
            entries.push((i - 1, -left / w));
        }
        if i + 1 < n {
            entries.push((i + 1, -right / w));
        }
        entries.push((i, diag / w));
        clamped_rows.push(LapRow { weight: w, entries });
    }
    let full = ball_vol(radius + h / 2.0) - ball_vol(radius - h / 2.0);
    let half = ball_vol(radius) - ball_vol(radius - h / 2.0);
    let coupling = flux(radius + h / 2.0) + flux(radius - h / 2.0);
    clamped_rows.push(LapRow {
        weight: half,
        entries: vec![(n - 1, -coupling / full)],
    });

    let boundary = vec![BoundaryPoint {
        x: [radius, 0.0],
        normal: [1.0, 0.0],
        weight: omega * radius.powi(dim as i32 - 1),
        inward: [Some(n - 1), Some(n - 2)],
        h,
    }];
    Grid {
        spec,
        coords,
        weights,
        boundary,
        boundary_nodes: vec![[radius, 0.0]],
        edges,
        clamped_rows,
        bandwidth: 1,
    }
}

fn rectangle_grid(spec: DomainSpec, lx: f64, ly: f64, nx: usize, ny: usize) -> Grid {
    let hx = lx / nx as f64;
    let hy = ly / ny as f64;
    let mx = nx - 1;
    let my = ny - 1;
    let idx = |i: usize, j: usize| -> Option<usize> {
        if (1..nx).contains(&i) && (1..ny).contains(&j) {
            Some((j - 1) * mx + (i - 1))
        } else {
            None
        }
    };
    let mut coords = Vec::with_capacity(mx * my);
    for j in 1..ny {
        for i in 1..nx {
            coords.push([i as f64 * hx, j as f64 * hy]);
        }
    }
    let cell = hx * hy;
    let weights = vec![cell; mx * my];
    let cx = hy / hx;
    let cy = hx / hy;

    let mut edges = Vec::new();
    for j in 1..ny {
        for i in 1..nx {
            let k = idx(i, j).expect("interior node");
            if i == 1 {
                edges.push(Edge {
                    i: k,
                    j: None,
                    c: cx,
                });
            }
            edges.push(Edge {
                i: k,
                j: idx(i + 1, j),
                c: cx,
            });
            if j == 1 {
                edges.push(Edge {
                    i: k,
                    j: None,
                    c: cy,
                });
            }
            edges.push(Edge {
                i: k,
                j: idx(i, j + 1),
                c: cy,
            });
        }
    }

    let mut clamped_rows = Vec::new();
    let (hx2, hy2) = (hx * hx, hy * hy);
    for j in 0..=ny {
        for i in 0..=nx {
            let on_x = i == 0 || i == nx;
            let on_y = j == 0 || j == ny;
            if on_x && on_y {
                continue;
            }
            if let Some(k) = idx(i, j) {
                let mut entries = vec![(k, 2.0 / hx2 + 2.0 / hy2)];
                for (ni, nj, c) in [
                    (i - 1, j, hx2),
                    (i + 1, j, hx2),
                    (i, j - 1, hy2),
                    (i, j + 1, hy2),
                ] {
                    if let Some(kk) = idx(ni, nj) {
                        entries.push((kk, -1.0 / c));
                    }
                }
                clamped_rows.push(LapRow {
                    weight: cell,
                    entries,
                });
            } else if on_x {
                let inner = if i == 0 { 1 } else { nx - 1 };
                let k = idx(inner, j).expect("inward neighbor");
                clamped_rows.push(LapRow {
                    weight: cell / 2.0,
                    entries: vec![(k, -2.0 / hx2)],
                });
            } else {
                let inner = if j == 0 { 1 } else { ny - 1 };
                let k = idx(i, inner).expect("inward neighbor");
                clamped_rows.push(LapRow {
                    weight: cell / 2.0,
                    entries: vec![(k, -2.0 / hy2)],
                });
            }
        }
    }

    let mut boundary = Vec::new();
    let edge_weight = |k: usize, n: usize, h: f64| if k == 0 || k == n { h / 2.0 } else { h };
    for i in 0..=nx {
        let x = i as f64 * hx;
        let w = edge_weight(i, nx, hx);
        boundary.push(BoundaryPoint {
            x: [x, 0.0],
            normal: [0.0, -1.0],
            weight: w,
            inward: [idx(i, 1), idx(i, 2)],
            h: hy,
        });
        boundary.push(BoundaryPoint {
            x: [x, ly],
            normal: [0.0, 1.0],
            weight: w,
            inward: [idx(i, ny - 1), idx(i, ny - 2)],
            h: hy,
        });
    }
    for j in 0..=ny {
        let y = j as f64 * hy;
        let w = edge_weight(j, ny, hy);
        boundary.push(BoundaryPoint {
            x: [0.0, y],
            normal: [-1.0, 0.0],
            weight: w,
            inward: [idx(1, j), idx(2, j)],
            h: hx,
        });
        boundary.push(BoundaryPoint {
            x: [lx, y],
            normal: [1.0, 0.0],
            weight: w,
            inward: [idx(nx - 1, j), idx(nx - 2, j)],
            h: hx,
        });
    }
    let boundary_nodes = boundary.iter().map(|b| b.x).collect();
    Grid {
        spec,
        coords,
        weights,
        boundary,
        boundary_nodes,
        edges,
        clamped_rows,
        bandwidth: mx,
    }
}
