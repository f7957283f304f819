//! Pucci–Serrin identity on computed fields, star-shapedness, the
//! Theorem A verdict and the nonexistence sweep.

use std::sync::Arc;

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exponents::{lambda_lower, to_f64, LowerThreshold, ProblemExponents};
use crate::nonlinearity::{check_h1, slope, Nonlinear, Nonlinearity, Perturbed};
use crate::operators::{
    BoundaryCondition, BoundaryPoint, DomainSpec, GridField, PolyharmonicOperator,
};
use crate::report::ser_extended;
use crate::solver::{mountain_pass, SolveConfig, CERTIFY_TOL};

/// Tolerance for `(x − y)·ν ≥ 0`.
const STAR_TOL: f64 = 1e-12;

/// Centroid of an interval or rectangle, center of a ball; verified
/// against the boundary normals.
pub fn star_center(domain: &DomainSpec, boundary: &[BoundaryPoint]) -> Result<[f64; 2]> {
    let y = match *domain {
        DomainSpec::Interval { length, .. } => [length / 2.0, 0.0],
        DomainSpec::Rectangle { lx, ly, .. } => [lx / 2.0, ly / 2.0],
        DomainSpec::Ball { .. } => [0.0, 0.0],
    };
    verify_star_shaped(boundary, y)?;
    Ok(y)
}

/// Checks `(x − y)·ν ≥ 0` at every boundary point.
pub fn verify_star_shaped(boundary: &[BoundaryPoint], y: [f64; 2]) -> Result<()> {
    for p in boundary {
        let d = star_weight(p, y);
        if d < -STAR_TOL {
            return Err(Error::Hypothesis(format!(
                "domain is not star-shaped about {y:?}: (x − y)·ν = {d:e} at {:?}",
                p.x
            )));
        }
    }
    Ok(())
}

fn star_weight(p: &BoundaryPoint, y: [f64; 2]) -> f64 {
    (p.x[0] - y[0]) * p.normal[0] + (p.x[1] - y[1]) * p.normal[1]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignVerdict {
    /// `∫(g(u)u − 2N/(N−2m)·G(u)) ≤ 0` up to quadrature error.
    IdentityConsistent,
    FoufouPositive,
    /// `N = 2m`, the quotient is undefined.
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub dim: u32,
    pub order: u32,
    pub nodes: usize,
    pub a: f64,
    pub y: [f64; 2],
    /// `N/2 − a − m`.
    pub form_coefficient: f64,
    pub form: f64,
    pub interior_term: f64,
    pub boundary_term: f64,
    pub residual: f64,
    pub foufou: Option<f64>,
    /// `1 + |∫g(u)u| + |2N/(N−2m)·∫G(u)|`.
    pub foufou_scale: f64,
    pub sign_verdict: SignVerdict,
}

/// Relative tolerance for the sign of the `foufou` integral.
pub const FOUFOU_TOL: f64 = 1e-6;

/// `a = (N − 2m)/2`.
pub fn default_multiplier(dim: u32, order: u32) -> f64 {
    (dim as f64 - 2.0 * order as f64) / 2.0
}

/// Evaluates both sides of the Pucci–Serrin identity
///
/// `∫[(N/2 − a − m)|D^m u|² + a·u·g(u) − N·G(u)] = −½∫_∂Ω|D^m u|²(x − y)·ν`
///
/// for a field satisfying the operator's boundary conditions. `a` defaults
/// to `(N − 2m)/2`.
pub fn pucci_serrin(
    op: &PolyharmonicOperator,
    u: &GridField,
    g: &impl Nonlinear,
    a: Option<f64>,
    y: [f64; 2],
) -> Result<IdentityReport> {
    let grid = op.grid();
    verify_star_shaped(grid.boundary(), y)?;
    let dim = grid.spec().spatial_dim();
    let order = op.order();
    let n = dim as f64;
    let a = a.unwrap_or_else(|| default_multiplier(dim, order));
    let form_coefficient = n / 2.0 - a - order as f64;
    let form = op.form(u)?;
    let interior_term =
        form_coefficient * form + u.integrate_map(|s| a * s * g.g(s) - n * g.primitive(s));
    let trace = op.boundary_trace(u)?;
    let boundary_term = -0.5 * trace.integrate_squared(|p| star_weight(p, y));

    let ug = u.integrate_map(|s| s * g.g(s));
    let big_g = u.integrate_map(|s| g.primitive(s));
    let denom = n - 2.0 * order as f64;
    let (foufou, foufou_scale, sign_verdict) = if denom == 0.0 {
        (None, 1.0 + ug.abs(), SignVerdict::NotApplicable)
    } else {
        let k = 2.0 * n / denom;
        let value = ug - k * big_g;
        let scale = 1.0 + ug.abs() + (k * big_g).abs();
        let verdict = if value <= FOUFOU_TOL * scale {
            SignVerdict::IdentityConsistent
        } else {
            SignVerdict::FoufouPositive
        };
        (Some(value), scale, verdict)
    };
    Ok(IdentityReport {
        dim,
        order,
        nodes: u.values().len(),
        a,
        y,
        form_coefficient,
        form,
        interior_term,
        boundary_term,
        residual: interior_term - boundary_term,
        foufou,
        foufou_scale,
        sign_verdict,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremAVerdict {
    NoNontrivialSolution,
    OutsideTheoremA,
}

/// Nonexistence on star-shaped domains under Dirichlet conditions: no
/// nontrivial solution when `λ < 0, q ≥ critical` or `λ = 0, q > critical`.
pub fn theorem_a_verdict(lambda: f64, q: &BigRational, pe: &ProblemExponents) -> TheoremAVerdict {
    let critical = pe.critical();
    if (lambda < 0.0 && *q >= critical) || (lambda == 0.0 && *q > critical) {
        TheoremAVerdict::NoNontrivialSolution
    } else {
        TheoremAVerdict::OutsideTheoremA
    }
}

/// Amplitude below which a candidate counts as the zero solution.
pub const COLLAPSE_AMPLITUDE: f64 = 1e-3;

/// Setup of a nonexistence sweep over `λ`.
#[derive(Clone, Debug)]
pub struct SweepProblem {
    pub domain: DomainSpec,
    pub order: u32,
    pub bc: BoundaryCondition,
    pub f: Arc<Nonlinearity>,
    pub p: BigRational,
    pub q: BigRational,
    /// Candidates with `sup|u|` above this are outside the small-amplitude
    /// regime and count as collapse.
    pub amplitude_cap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowVerdict {
    Success,
    Collapse,
    NotConverged,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub verdict: RowVerdict,
    /// `sup|u|` of the candidate, `0` after collapse.
    pub amplitude: f64,
    /// `sup|u|` as computed, before the cap is applied.
    pub raw_amplitude: f64,
    /// Relative strong residual, `NaN` without a candidate.
    #[serde(serialize_with = "ser_extended")]
    pub residual: f64,
    /// `∫|u|^{p+1}`.
    pub integral: f64,
    pub energy: f64,
    #[serde(serialize_with = "ser_opt")]
    pub foufou: Option<f64>,
    #[serde(serialize_with = "ser_opt")]
    pub identity_residual: Option<f64>,
    pub iterations: usize,
}

fn ser_opt<S: serde::Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => ser_extended(x, s),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub lambda_star: Option<f64>,
    pub successes: usize,
    /// Least-squares slope of `log∫|u|^{p+1}` against `log λ` on successes.
    pub fitted_slope: Option<f64>,
    /// `(p+1)/(q−p)`.
    pub upper_exponent: f64,
    /// `−(p+1)/(p−1)`, absent for `p = 1`.
    pub lower_exponent: Option<f64>,
    /// Fitted slope within 25% of `upper_exponent`.
    pub slope_matches_upper: Option<bool>,
    pub slope_matches_lower: Option<bool>,
    /// Smallest `C₁` with `∫|u|^{p+1} ≤ C₁λ^{(p+1)/(q−p)}` on successes.
    pub c1: Option<f64>,
    /// Largest `C₂` with `C₂λ^{−(p+1)/(p−1)} ≤ ∫|u|^{p+1}` on successes.
    pub c2: Option<f64>,
    /// Empirical threshold from the fitted constants.
    pub lambda_lower_empirical: Option<LowerThreshold>,
    /// Every `λ < 10⁻²·λ*` collapsed; absent when no such row exists.
    pub collapse_below_threshold: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

impl ThresholdReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        use crate::report::{write_table, CsvCell};
        let verdict = |v: RowVerdict| match v {
            RowVerdict::Success => "success",
            RowVerdict::Collapse => "collapse",
            RowVerdict::NotConverged => "not-converged",
        };
        let opt = |v: Option<f64>| v.map_or(CsvCell::Text(String::new()), CsvCell::Num);
        let rows: Vec<Vec<CsvCell>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    CsvCell::Num(r.lambda),
                    CsvCell::Num(r.amplitude),
                    CsvCell::Num(r.residual),
                    opt(r.foufou),
                    CsvCell::Text(verdict(r.verdict).into()),
                    CsvCell::Num(r.raw_amplitude),
                    CsvCell::Num(r.integral),
                ]
            })
            .collect();
        write_table(
            out,
            &[
                "lambda",
                "amplitude",
                "residual",
                "foufou",
                "verdict",
                "raw_amplitude",
                "integral",
            ],
            &rows,
        )
    }
}

/// Runs the mountain-pass solver on `g = f + λ|s|^{p−1}s` for every `λ` in
/// the grid and summarizes where nontrivial small solutions appear.
///
/// Rows run concurrently on `jobs` threads (`0` = rayon default); the
/// report order follows the grid.
pub fn nonexistence_sweep(
    problem: &SweepProblem,
    lambdas: &[f64],
    probe: &[f64],
    cfg: &SolveConfig,
    jobs: usize,
) -> Result<ThresholdReport> {
    if lambdas.is_empty() {
        return invalid("λ grid is empty");
    }
    if let Some(l) = lambdas.iter().find(|l| !l.is_finite() || **l < 0.0) {
        return invalid(format!("λ = {l} must be finite and non-negative"));
    }
    if !(problem.amplitude_cap > COLLAPSE_AMPLITUDE) {
        return invalid(format!(
            "amplitude cap {} must exceed {COLLAPSE_AMPLITUDE}",
            problem.amplitude_cap
        ));
    }
    if problem.bc != BoundaryCondition::Dirichlet && problem.order > 1 {
        return invalid("the nonexistence sweep needs Dirichlet conditions");
    }
    let p = to_f64(&problem.p);
    let q = to_f64(&problem.q);
    if !(p >= 1.0) || problem.q <= problem.p {
        return invalid(format!("sweep needs 1 ≤ p < q, got p = {p}, q = {q}"));
    }
    let op = PolyharmonicOperator::build(problem.domain.clone(), problem.order, problem.bc)?;
    let dim = op.grid().spec().spatial_dim();
    if dim <= 2 * problem.order {
        return Err(Error::Unsupported(format!(
            "critical exponent undefined for N = {dim}, m = {}",
            problem.order
        )));
    }
    let critical = (dim + 2 * problem.order) as f64 / (dim - 2 * problem.order) as f64;
    let h1 = check_h1(
        &problem.f,
        q,
        critical,
        problem.amplitude_cap.min(1.0),
        probe,
    )?;
    if !h1.passed {
        return Err(Error::Hypothesis(format!(
            "f fails the supercritical growth conditions for q = {q}"
        )));
    }
    let y = star_center(op.grid().spec(), op.grid().boundary())?;
    let eig = op.principal_eigenpair()?;

    let run = |&lambda: &f64| sweep_row(&op, &eig.w0, problem, lambda, p, y, cfg);
    let rows: Vec<SweepRow> = if jobs == 0 {
        lambdas.par_iter().map(run).collect::<Result<_>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?
            .install(|| lambdas.par_iter().map(run).collect::<Result<_>>())?
    };
    let summary = summarize(&rows, &problem.p, &problem.q)?;
    Ok(ThresholdReport { rows, summary })
}

fn sweep_row(
    op: &PolyharmonicOperator,
    w0: &GridField,
    problem: &SweepProblem,
    lambda: f64,
    p: f64,
    y: [f64; 2],
    cfg: &SolveConfig,
) -> Result<SweepRow> {
    let g = Perturbed {
        base: problem.f.clone(),
        lambda,
        p,
    };
    let mut row = SweepRow {
        lambda,
        verdict: RowVerdict::Collapse,
        amplitude: 0.0,
        raw_amplitude: 0.0,
        residual: f64::NAN,
        integral: 0.0,
        energy: 0.0,
        foufou: None,
        identity_residual: None,
        iterations: 0,
    };
    let mp = match mountain_pass(op, &g, w0, 1.0, cfg) {
        Ok(mp) => mp,
        Err(Error::Geometry(msg)) => {
            log::debug!("λ = {lambda}: {msg}");
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    let u = &mp.u;
    let au = op.apply(u)?;
    let res: Vec<f64> = au
        .values()
        .iter()
        .zip(u.values())
        .map(|(a, &s)| a - g.g(s))
        .collect();
    row.residual = crate::operators::sup_norm(&res) / (1.0 + au.sup_norm());
    row.raw_amplitude = u.sup_norm();
    row.energy = mp.energy;
    row.iterations = mp.iterations;
    row.integral = u.integrate_map(|s| s.abs().powf(p + 1.0));
    if let Ok(id) = pucci_serrin(op, u, &g, None, y) {
        row.foufou = id.foufou;
        row.identity_residual = Some(id.residual);
    }
    row.verdict = if !mp.converged {
        RowVerdict::NotConverged
    } else if row.raw_amplitude > problem.amplitude_cap || row.raw_amplitude <= COLLAPSE_AMPLITUDE {
        RowVerdict::Collapse
    } else if row.residual <= CERTIFY_TOL {
        RowVerdict::Success
    } else {
        RowVerdict::NotConverged
    };
    if row.verdict == RowVerdict::Success {
        row.amplitude = row.raw_amplitude;
    }
    Ok(row)
}

fn summarize(rows: &[SweepRow], p: &BigRational, q: &BigRational) -> Result<SweepSummary> {
    let pf = to_f64(p);
    let qf = to_f64(q);
    let upper_exponent = (pf + 1.0) / (qf - pf);
    let lower_exponent = (pf > 1.0).then(|| -(pf + 1.0) / (pf - 1.0));
    let ok: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| r.verdict == RowVerdict::Success && r.lambda > 0.0)
        .collect();
    let lambda_star = ok.iter().map(|r| r.lambda).reduce(f64::min);
    let fitted_slope = (ok.len() >= 2).then(|| {
        let pts: Vec<(f64, f64)> = ok
            .iter()
            .map(|r| (r.lambda.ln(), r.integral.ln()))
            .collect();
        slope(&pts)
    });
    let within = |s: f64, e: f64| (s - e).abs() <= 0.25 * e.abs();
    let c1 = ok
        .iter()
        .map(|r| r.integral / r.lambda.powf(upper_exponent))
        .reduce(f64::max);
    let c2 = lower_exponent.and_then(|e| {
        ok.iter()
            .map(|r| r.integral / r.lambda.powf(e))
            .reduce(f64::min)
    });
    let lambda_lower_empirical = match (c1, c2) {
        (Some(c1), Some(c2)) if c1 > 0.0 && c2 > 0.0 => Some(lambda_lower(c1, c2, p, q)?),
        (Some(c1), None) if c1 > 0.0 && pf == 1.0 => Some(lambda_lower(c1, c1, p, q)?),
        _ => None,
    };
    let collapse_below_threshold = lambda_star.and_then(|ls| {
        let below: Vec<&SweepRow> = rows.iter().filter(|r| r.lambda < 1e-2 * ls).collect();
        (!below.is_empty()).then(|| below.iter().all(|r| r.verdict == RowVerdict::Collapse))
    });
    Ok(SweepSummary {
        lambda_star,
        successes: ok.len(),
        fitted_slope,
        upper_exponent,
        lower_exponent,
        slope_matches_upper: fitted_slope.map(|s| within(s, upper_exponent)),
        slope_matches_lower: fitted_slope.and_then(|s| lower_exponent.map(|e| within(s, e))),
        c1,
        c2,
        lambda_lower_empirical,
        collapse_below_threshold,
    })
}
