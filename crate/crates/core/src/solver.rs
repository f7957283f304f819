//! Mountain-pass solver for the truncated problems and the existence
//! pipeline built on it.
//!
//! The path from `0` to the endpoint is kept as the `n`-node segment
//! `{t·u : 0 ≤ t ≤ T}` through the current maximizer. Each outer iteration
//! locates the maximum on that segment, descends it along the Sobolev
//! gradient, and accepts the step only when the new path maximum is strictly
//! lower.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nonlinearity::{
    calibrate_truncation, check_sign_condition, estimate_h0, Branch, H0Estimate, Nonlinear,
    Nonlinearity, TruncatedNonlinearity, TruncationParams,
};
use crate::operators::{
    sup_norm, BoundaryCondition, DomainSpec, Eigenpair, GridField, PolyharmonicOperator,
};
use crate::quad::neumaier_sum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub path_nodes: usize,
    /// Tolerance on the gradient norm in the energy norm.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub shrink: f64,
    pub max_halvings: usize,
    pub max_doublings: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            path_nodes: 40,
            grad_tol: 1e-6,
            max_iter: 5000,
            shrink: 0.5,
            max_halvings: 40,
            max_doublings: 60,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.path_nodes < 3 {
            return invalid(format!(
                "path_nodes = {} must be at least 3",
                self.path_nodes
            ));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return invalid(format!("grad_tol = {} must be positive", self.grad_tol));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return invalid(format!("shrink = {} must lie in (0, 1)", self.shrink));
        }
        if self.max_iter == 0 || self.max_halvings == 0 || self.max_doublings == 0 {
            return invalid("iteration budgets must be positive");
        }
        Ok(())
    }
}

/// `I(u) = ½∫|D^m u|² − ∫G(u)`.
pub fn energy(op: &PolyharmonicOperator, g: &impl Nonlinear, u: &GridField) -> Result<f64> {
    Ok(0.5 * op.form(u)? - u.integrate_map(|s| g.primitive(s)))
}

/// Strong-form residual `(−Δ)^m u − g(u)`.
pub fn euler_residual(
    op: &PolyharmonicOperator,
    g: &impl Nonlinear,
    u: &GridField,
) -> Result<GridField> {
    let au = op.apply(u)?;
    let vals = au
        .values()
        .iter()
        .zip(u.values())
        .map(|(a, &s)| a - g.g(s))
        .collect();
    op.field(vals)
}

/// Gradient of `I` in the energy inner product: `u − ((−Δ)^m)⁻¹ g(u)`.
pub fn sobolev_gradient(
    op: &PolyharmonicOperator,
    g: &impl Nonlinear,
    u: &GridField,
) -> Result<GridField> {
    let rhs = u.map(|s| g.g(s));
    let sol = op.solve(&rhs)?;
    let vals = u
        .values()
        .iter()
        .zip(sol.values())
        .map(|(a, b)| a - b)
        .collect();
    op.field(vals)
}

/// `I′(u)u = ∫|D^m u|² − ∫g(u)u`.
pub fn nehari_residual(
    op: &PolyharmonicOperator,
    g: &impl Nonlinear,
    u: &GridField,
) -> Result<f64> {
    Ok(op.form(u)? - u.integrate_map(|s| g.g(s) * s))
}

/// Raw result of one mountain-pass run.
#[derive(Clone, Debug)]
pub struct MountainPassOutcome {
    pub u: GridField,
    pub energy: f64,
    pub grad_norm: f64,
    pub nehari_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Endpoint multiplier `b₀` found by doubling.
    pub b0: f64,
    /// Maximum of `I` along the initial path.
    pub initial_level: f64,
    /// Path maximum after every accepted step, initial path first.
    pub levels: Vec<f64>,
}

struct Ray<'a, G: Nonlinear> {
    op: &'a PolyharmonicOperator,
    g: &'a G,
    weights: &'a [f64],
}

impl<G: Nonlinear> Ray<'_, G> {
    fn energy(&self, u: &[f64], t: f64) -> f64 {
        let pot = neumaier_sum(
            self.weights
                .iter()
                .zip(u)
                .map(|(w, &s)| w * self.g.primitive(t * s)),
        );
        0.5 * t * t * self.op.form_values(u) - pot
    }

    /// `d/dt I(tu)` for a direction with `form(u) = 1`.
    fn slope(&self, u: &[f64], t: f64) -> f64 {
        t - neumaier_sum(
            self.weights
                .iter()
                .zip(u)
                .map(|(w, &s)| w * self.g.g(t * s) * s),
        )
    }

    /// Smallest `T ≥ start` of the form `start·2^k` with `I(Tu) ≤ 0`.
    fn endpoint(&self, u: &[f64], start: f64, max_doublings: usize) -> Option<(f64, usize)> {
        let mut t = start;
        for k in 0..=max_doublings {
            if self.energy(u, t) <= 0.0 {
                return Some((t, k));
            }
            t *= 2.0;
        }
        None
    }

    /// Maximum of `I` on the `n`-node path `{t·u : t ∈ [0, T]}`, refined by
    /// bisection on the slope around the best node (smallest index on ties).
    fn peak(&self, u: &[f64], end: f64, nodes: usize) -> Option<(f64, f64)> {
        let ts: Vec<f64> = (0..nodes)
            .map(|i| end * i as f64 / (nodes - 1) as f64)
            .collect();
        let es: Vec<f64> = ts.iter().map(|&t| self.energy(u, t)).collect();
        let mut best = 0;
        for i in 1..nodes {
            if es[i] > es[best] {
                best = i;
            }
        }
        if best == 0 || es[best] <= 0.0 {
            return None;
        }
        let mut a = ts[best - 1];
        let mut b = if best + 1 < nodes { ts[best + 1] } else { end };
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.slope(u, mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-15 * b {
                break;
            }
        }
        let t = 0.5 * (a + b);
        let e = self.energy(u, t);
        if e >= es[best] {
            Some((t, e))
        } else {
            Some((ts[best], es[best]))
        }
    }
}

fn normalized(op: &PolyharmonicOperator, v: &[f64]) -> Option<Vec<f64>> {
    let n = op.form_values(v).sqrt();
    if n > 0.0 && n.is_finite() {
        Some(v.iter().map(|x| x / n).collect())
    } else {
        None
    }
}

/// Runs the mountain-pass iteration for `g`, starting from the path
/// `0 → b₀·scale·direction` with `b₀ = 1, 2, 4, …` doubled until the
/// endpoint energy is non-positive.
///
/// Reaching the iteration budget, or a step that cannot lower the path
/// maximum, returns the partial outcome with `converged = false`.
pub fn mountain_pass(
    op: &PolyharmonicOperator,
    g: &impl Nonlinear,
    direction: &GridField,
    scale: f64,
    cfg: &SolveConfig,
) -> Result<MountainPassOutcome> {
    cfg.validate()?;
    if !(scale > 0.0 && scale.is_finite()) {
        return invalid(format!("endpoint scale {scale} must be positive"));
    }
    let ray = Ray {
        op,
        g,
        weights: op.grid().weights(),
    };
    let mut u = normalized(op, direction.values())
        .ok_or_else(|| Error::InvalidInput("initial direction is zero".into()))?;

    let (end, doublings) = ray.endpoint(&u, scale, cfg.max_doublings).ok_or_else(|| {
        Error::Geometry(format!(
            "I stays positive after {} doublings of b₀",
            cfg.max_doublings
        ))
    })?;
    let b0 = 2f64.powi(doublings as i32);
    let (mut t, mut level) = ray
        .peak(&u, end, cfg.path_nodes)
        .ok_or_else(|| Error::Geometry("no positive ridge between 0 and the endpoint".into()))?;
    let initial_level = level;
    let mut levels = vec![level];
    let mut step = 1.0f64;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..cfg.max_iter {
        iterations = it;
        let z: Vec<f64> = u.iter().map(|s| t * s).collect();
        let rhs: Vec<f64> = z.iter().map(|&s| g.g(s)).collect();
        let sol = op.solve_values(&rhs);
        let w: Vec<f64> = z.iter().zip(&sol).map(|(a, b)| a - b).collect();
        grad_norm = op.form_values(&w).max(0.0).sqrt();
        if grad_norm <= cfg.grad_tol {
            converged = true;
            break;
        }
        step = (2.0 * step).min(1.0);
        let mut accepted = None;
        for _ in 0..cfg.max_halvings {
            let zc: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a - step * b).collect();
            if let Some(uc) = normalized(op, &zc) {
                let found = ray
                    .endpoint(&uc, t, cfg.max_doublings)
                    .and_then(|(end, _)| ray.peak(&uc, end, cfg.path_nodes));
                if let Some((tc, ec)) = found {
                    if ec < level {
                        accepted = Some((uc, tc, ec));
                        break;
                    }
                }
            }
            step *= cfg.shrink;
        }
        match accepted {
            Some((uc, tc, ec)) => {
                u = uc;
                t = tc;
                level = ec;
                levels.push(ec);
            }
            None => {
                log::debug!(
                    "mountain pass stalled at iteration {it} with gradient norm {grad_norm:e}"
                );
                break;
            }
        }
        iterations = it + 1;
    }

    let field = op.field(u.iter().map(|s| t * s).collect())?;
    Ok(MountainPassOutcome {
        energy: energy(op, g, &field)?,
        nehari_residual: nehari_residual(op, g, &field)?,
        u: field,
        grad_norm,
        iterations,
        converged,
        b0,
        initial_level,
        levels,
    })
}

/// Everything that defines one existence run.
#[derive(Clone, Debug)]
pub struct Problem {
    pub domain: DomainSpec,
    pub order: u32,
    pub bc: BoundaryCondition,
    pub f: Arc<Nonlinearity>,
    pub p: f64,
    pub alpha: f64,
    /// `γ` used for the sup-norm diagnostic, if known.
    pub gamma: Option<f64>,
}

/// Constants `C` such that the computed solution satisfies the energy,
/// gradient and sup-norm bounds at this `α` with equality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundDiagnostics {
    pub nu: f64,
    /// `I_α(u_α)·α^ν`.
    pub energy_constant: f64,
    /// `∫|D^m u_α|²·α^ν`.
    pub gradient_constant: f64,
    /// `sup|u_α|·α^{γν}`.
    pub sup_constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Detruncation {
    pub sup_alpha_u: f64,
    pub threshold: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certification {
    /// `sup|(−Δ)^m v − f(v) − λ|v|^{p−1}v|`.
    pub residual_sup: f64,
    /// Residual divided by `1 + sup|(−Δ)^m v|`.
    pub relative_residual: f64,
    pub residual_ok: bool,
    /// `None` when the check does not apply (`f ≡ 0`).
    pub sup_v_below_one: Option<bool>,
    pub certified: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Certified,
    /// The solution reaches the cut-off region; a smaller `α` is needed.
    AlphaTooLarge,
    ResidualTooLarge,
    NotConverged,
}

/// Relative residual accepted when certifying an untruncated solution.
pub const CERTIFY_TOL: f64 = 1e-4;

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub u_alpha: GridField,
    pub branch: Branch,
    pub alpha: f64,
    pub lambda: f64,
    pub lambda1: f64,
    pub truncation: TruncationParams,
    pub h0: H0Estimate,
    pub energy: f64,
    pub form: f64,
    pub grad_norm: f64,
    pub nehari_residual: f64,
    pub nehari_ok: bool,
    pub sup_u: f64,
    pub sup_v: f64,
    pub iterations: usize,
    pub converged: bool,
    pub b0: f64,
    pub initial_level: f64,
    pub bounds: BoundDiagnostics,
    pub detruncation: Option<Detruncation>,
    pub certification: Option<Certification>,
    pub outcome: Outcome,
}

impl SolveReport {
    /// `v_α = α·u_α`.
    pub fn v(&self) -> GridField {
        self.u_alpha.scaled(self.alpha)
    }
}

/// Operator, eigenpair and truncation shared by the solves of one problem.
pub struct Prepared {
    pub op: PolyharmonicOperator,
    pub eig: Eigenpair,
    pub h0: H0Estimate,
    pub tn: TruncatedNonlinearity,
}

pub fn prepare(problem: &Problem, probe: &[f64]) -> Result<Prepared> {
    if !(problem.p > 1.0) {
        return invalid(format!("existence needs p > 1, got {}", problem.p));
    }
    let op = PolyharmonicOperator::build(problem.domain.clone(), problem.order, problem.bc)?;
    let eig = op.principal_eigenpair()?;
    let h0 = estimate_h0(&problem.f, probe, eig.lambda1)?;
    let params = calibrate_truncation(&problem.f, &h0, eig.lambda1)?;
    let tn = TruncatedNonlinearity::new(problem.f.clone(), params, problem.alpha, problem.p)?;
    Ok(Prepared { op, eig, h0, tn })
}

/// Runs one branch of the truncated problem and certifies the result.
pub fn solve_branch(
    problem: &Problem,
    prep: &Prepared,
    branch: Branch,
    cfg: &SolveConfig,
) -> Result<SolveReport> {
    let tn = &prep.tn;
    let params = tn.params();
    let view = tn.view(branch);
    let direction = match branch {
        Branch::Minus => prep.eig.w0.scaled(-1.0),
        _ => prep.eig.w0.clone(),
    };
    let alpha = problem.alpha;
    let scale = alpha.powf(-params.nu / (problem.p + 1.0));
    let mp = mountain_pass(&prep.op, &view, &direction, scale, cfg)?;
    let form = prep.op.form(&mp.u)?;
    let sup_u = mp.u.sup_norm();
    let lambda = alpha.powf(1.0 - problem.p);
    let a_nu = alpha.powf(params.nu);
    let bounds = BoundDiagnostics {
        nu: params.nu,
        energy_constant: mp.energy * a_nu,
        gradient_constant: form * a_nu,
        sup_constant: problem.gamma.map(|g| sup_u * alpha.powf(g * params.nu)),
    };
    let nehari_ok = mp.nehari_residual.abs() <= 10.0 * cfg.grad_tol * (1.0 + form);

    let truncation_active = !problem.f.is_zero();
    let (detruncation, certification, outcome) = if !mp.converged {
        (None, None, Outcome::NotConverged)
    } else {
        let det = truncation_active.then(|| {
            let sup_alpha_u = alpha * sup_u;
            let threshold = params.s0p / 2.0;
            Detruncation {
                sup_alpha_u,
                threshold,
                holds: sup_alpha_u < threshold,
            }
        });
        if det.as_ref().is_some_and(|d| !d.holds) {
            (det, None, Outcome::AlphaTooLarge)
        } else {
            let cert = certify(
                &prep.op,
                &problem.f,
                &mp.u,
                alpha,
                problem.p,
                lambda,
                truncation_active,
            )?;
            let outcome = if cert.certified {
                Outcome::Certified
            } else {
                Outcome::ResidualTooLarge
            };
            (det, Some(cert), outcome)
        }
    };

    Ok(SolveReport {
        branch,
        alpha,
        lambda,
        lambda1: prep.eig.lambda1,
        truncation: params.clone(),
        h0: prep.h0.clone(),
        energy: mp.energy,
        form,
        grad_norm: mp.grad_norm,
        nehari_residual: mp.nehari_residual,
        nehari_ok,
        sup_u,
        sup_v: alpha * sup_u,
        iterations: mp.iterations,
        converged: mp.converged,
        b0: mp.b0,
        initial_level: mp.initial_level,
        bounds,
        detruncation,
        certification,
        outcome,
        u_alpha: mp.u,
    })
}

fn certify(
    op: &PolyharmonicOperator,
    f: &Nonlinearity,
    u: &GridField,
    alpha: f64,
    p: f64,
    lambda: f64,
    check_sup: bool,
) -> Result<Certification> {
    let v = u.scaled(alpha);
    let av = op.apply(&v)?;
    let residual: Vec<f64> = av
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, &s)| a - f.f(s) - lambda * s.abs().powf(p - 1.0) * s)
        .collect();
    let residual_sup = sup_norm(&residual);
    let relative_residual = residual_sup / (1.0 + av.sup_norm());
    let residual_ok = relative_residual <= CERTIFY_TOL;
    let sup_v_below_one = check_sup.then(|| v.sup_norm() < 1.0);
    Ok(Certification {
        residual_sup,
        relative_residual,
        residual_ok,
        sup_v_below_one,
        certified: residual_ok && sup_v_below_one.unwrap_or(true),
    })
}

/// Calibrates the truncation, solves the truncated problem and, when the
/// solution stays below the cut-off, certifies `v = α·u` as a solution of
/// the untruncated problem with `λ = α^{1−p}`.
pub fn solve_existence(problem: &Problem, probe: &[f64], cfg: &SolveConfig) -> Result<SolveReport> {
    let prep = prepare(problem, probe)?;
    solve_branch(problem, &prep, Branch::Full, cfg)
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoSignedReport {
    pub plus: SolveReport,
    pub minus: SolveReport,
    /// `min u₊` over interior nodes.
    pub plus_min: f64,
    /// `max u₋` over interior nodes.
    pub minus_max: f64,
    pub signs_ok: bool,
    /// `sup|u₊ + u₋|`, zero for odd `g`.
    pub asymmetry: f64,
    /// Relative residual of each branch against the unsigned `g_α`.
    pub plus_unsigned_residual: f64,
    pub minus_unsigned_residual: f64,
}

/// Solves with `g_α^+` and `g_α^−` and checks `u₋ < 0 < u₊` pointwise.
///
/// For `m = 1` Dirichlet and Navier conditions coincide and both are
/// accepted.
pub fn solve_two_signed(
    problem: &Problem,
    probe: &[f64],
    cfg: &SolveConfig,
) -> Result<TwoSignedReport> {
    if problem.bc != BoundaryCondition::Navier && problem.order > 1 {
        return invalid("the two-signed construction needs Navier conditions");
    }
    check_sign_condition(&problem.f, probe)?;
    let prep = prepare(problem, probe)?;
    let plus = solve_branch(problem, &prep, Branch::Plus, cfg)?;
    let minus = solve_branch(problem, &prep, Branch::Minus, cfg)?;
    let plus_min = plus
        .u_alpha
        .values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let minus_max = minus
        .u_alpha
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let asymmetry = sup_norm(
        &plus
            .u_alpha
            .values()
            .iter()
            .zip(minus.u_alpha.values())
            .map(|(a, b)| a + b)
            .collect::<Vec<_>>(),
    );
    let unsigned = |u: &GridField| -> Result<f64> {
        let r = euler_residual(&prep.op, &prep.tn, u)?;
        Ok(r.sup_norm() / (1.0 + prep.op.apply(u)?.sup_norm()))
    };
    Ok(TwoSignedReport {
        plus_unsigned_residual: unsigned(&plus.u_alpha)?,
        minus_unsigned_residual: unsigned(&minus.u_alpha)?,
        signs_ok: plus_min > 0.0 && minus_max < 0.0,
        plus,
        minus,
        plus_min,
        minus_max,
        asymmetry,
    })
}
