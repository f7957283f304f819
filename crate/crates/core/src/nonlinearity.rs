//! Nonlinearities `f`, their primitives, the small-amplitude hypothesis
//! checks and the cut-off truncations `f_α`, `g_α`, `g_α^±`.

use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad::{adaptive, gauss_legendre_8, Neumaier};

/// Anything that can act as the right-hand side `g(u)` of a variational
/// problem, together with its primitive `G(s) = ∫₀ˢ g`.
pub trait Nonlinear: Sync {
    fn g(&self, s: f64) -> f64;
    fn primitive(&self, s: f64) -> f64;
}

/// Builtin nonlinearities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BuiltinSpec {
    /// `|s|^{q−1}s·e^{as}`.
    PowerExp {
        q: f64,
        a: f64,
    },
    /// `L·s·e^{(q+1)s}`.
    LinearExp {
        #[serde(rename = "L")]
        l: f64,
        q: f64,
    },
    /// `−|s|^{2−ν}e^{rate·s}/s`.
    NegativeSingular {
        nu: f64,
        rate: f64,
    },
    /// `coef·|s|^{q−1}s`.
    PurePower {
        q: f64,
        #[serde(default = "one")]
        coef: f64,
    },
    /// `c·s`.
    Linear {
        c: f64,
    },
    Zero,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug)]
enum Kind {
    Builtin(BuiltinSpec),
    Sampled(Pchip),
}

/// A scalar nonlinearity `f` with its primitive `F(s) = ∫₀ˢ f`.
#[derive(Clone, Debug)]
pub struct Nonlinearity {
    kind: Kind,
}

const PRIMITIVE_TOL: f64 = 1e-15;

impl Nonlinearity {
    pub fn builtin(spec: BuiltinSpec) -> Result<Self> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                invalid(format!("parameter {name} = {v} must be finite"))
            }
        };
        match &spec {
            BuiltinSpec::PowerExp { q, a } => {
                finite("a", *a)?;
                if !(*q > 0.0 && q.is_finite()) {
                    return invalid(format!("power-exp needs q > 0, got {q}"));
                }
            }
            BuiltinSpec::LinearExp { l, q } => {
                finite("L", *l)?;
                finite("q", *q)?;
                if *q == -1.0 {
                    return invalid("linear-exp needs q ≠ −1");
                }
            }
            BuiltinSpec::NegativeSingular { nu, rate } => {
                finite("rate", *rate)?;
                if !(0.0..1.0).contains(nu) {
                    return invalid(format!("negative-singular needs ν ∈ [0, 1), got {nu}"));
                }
            }
            BuiltinSpec::PurePower { q, coef } => {
                finite("coef", *coef)?;
                if !(*q > 0.0 && q.is_finite()) {
                    return invalid(format!("pure-power needs q > 0, got {q}"));
                }
            }
            BuiltinSpec::Linear { c } => finite("c", *c)?,
            BuiltinSpec::Zero => {}
        }
        Ok(Nonlinearity {
            kind: Kind::Builtin(spec),
        })
    }

    pub fn zero() -> Self {
        Nonlinearity {
            kind: Kind::Builtin(BuiltinSpec::Zero),
        }
    }

    /// Monotone cubic interpolant of a table `(s, f(s))`; `f(0) = 0` is
    /// enforced by inserting or overwriting the node at zero.
    pub fn sampled(s: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        Ok(Nonlinearity {
            kind: Kind::Sampled(Pchip::new(s, f)?),
        })
    }

    /// Reads a two-column CSV `(s, f(s))`; a non-numeric first row is a header.
    pub fn sampled_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let (mut s, mut f) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return invalid(format!(
                    "table row {} has {} columns, expected 2",
                    line + 1,
                    rec.len()
                ));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    s.push(a);
                    f.push(b);
                }
                _ if line == 0 => continue,
                _ => return invalid(format!("table row {} is not numeric", line + 1)),
            }
        }
        Self::sampled(s, f)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Builtin(BuiltinSpec::Zero))
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            Kind::Builtin(b) => format!("{b:?}"),
            Kind::Sampled(p) => format!("Sampled {{ nodes: {} }}", p.x.len()),
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Builtin(b) => match *b {
                BuiltinSpec::PowerExp { q, a } => s.abs().powf(q - 1.0) * s * (a * s).exp(),
                BuiltinSpec::LinearExp { l, q } => l * s * ((q + 1.0) * s).exp(),
                BuiltinSpec::NegativeSingular { nu, rate } => {
                    if s == 0.0 {
                        0.0
                    } else {
                        -s.signum() * s.abs().powf(1.0 - nu) * (rate * s).exp()
                    }
                }
                BuiltinSpec::PurePower { q, coef } => coef * s.abs().powf(q - 1.0) * s,
                BuiltinSpec::Linear { c } => c * s,
                BuiltinSpec::Zero => 0.0,
            },
            Kind::Sampled(p) => p.eval(s),
        }
    }

    /// `F(s) = ∫₀ˢ f`; closed forms where available, tanh-sinh otherwise.
    pub fn primitive(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Builtin(b) => match *b {
                BuiltinSpec::PowerExp { q, a: 0.0 } => s.abs().powf(q + 1.0) / (q + 1.0),
                BuiltinSpec::LinearExp { l, q } => l * linear_exp_primitive(q + 1.0, s),
                BuiltinSpec::PurePower { q, coef } => coef * s.abs().powf(q + 1.0) / (q + 1.0),
                BuiltinSpec::Linear { c } => c * s * s / 2.0,
                BuiltinSpec::Zero => 0.0,
                BuiltinSpec::PowerExp { .. } | BuiltinSpec::NegativeSingular { .. } => {
                    adaptive(|t| self.f(t), 0.0, s, PRIMITIVE_TOL)
                }
            },
            Kind::Sampled(p) => p.integral(s),
        }
    }
}

/// `∫₀ˢ t·e^{bt} dt`, by series when `|bs|` is small.
fn linear_exp_primitive(b: f64, s: f64) -> f64 {
    let x = b * s;
    if x.abs() < 0.5 {
        // Σ_k b^k s^{k+2} / (k!(k+2))
        let mut term = s * s;
        let mut acc = Neumaier::new();
        for k in 0..40 {
            acc.add(term / (k as f64 + 2.0));
            term *= x / (k as f64 + 1.0);
            if term.abs() < 1e-18 * acc.value().abs() {
                break;
            }
        }
        acc.value()
    } else {
        ((s / b) - 1.0 / (b * b)) * x.exp() + 1.0 / (b * b)
    }
}

impl Nonlinear for Nonlinearity {
    fn g(&self, s: f64) -> f64 {
        self.f(s)
    }

    fn primitive(&self, s: f64) -> f64 {
        Nonlinearity::primitive(self, s)
    }
}

/// `f(s) + λ|s|^{p−1}s` without truncation.
#[derive(Clone, Debug)]
pub struct Perturbed {
    pub base: Arc<Nonlinearity>,
    pub lambda: f64,
    pub p: f64,
}

impl Nonlinear for Perturbed {
    fn g(&self, s: f64) -> f64 {
        self.base.f(s) + self.lambda * s.abs().powf(self.p - 1.0) * s
    }

    fn primitive(&self, s: f64) -> f64 {
        self.base.primitive(s) + self.lambda * s.abs().powf(self.p + 1.0) / (self.p + 1.0)
    }
}

/// A nonlinearity given by a pair of closures `(g, G)`.
pub struct FnNonlinear<G, P> {
    pub g: G,
    pub primitive: P,
}

impl<G, P> Nonlinear for FnNonlinear<G, P>
where
    G: Fn(f64) -> f64 + Sync,
    P: Fn(f64) -> f64 + Sync,
{
    fn g(&self, s: f64) -> f64 {
        (self.g)(s)
    }

    fn primitive(&self, s: f64) -> f64 {
        (self.primitive)(s)
    }
}

/// Piecewise cubic Hermite interpolant with Fritsch–Butland slopes.
#[derive(Clone, Debug)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    cum: Vec<f64>,
    zero: usize,
}

impl Pchip {
    fn new(mut x: Vec<f64>, mut y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return invalid("table columns differ in length");
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Evaluation("table contains non-finite values".into()));
        }
        let mut pairs: Vec<(f64, f64)> = x.drain(..).zip(y.drain(..)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return invalid("table has repeated abscissae");
        }
        match pairs.iter().position(|p| p.0 == 0.0) {
            Some(k) => pairs[k].1 = 0.0,
            None => {
                let k = pairs.partition_point(|p| p.0 < 0.0);
                pairs.insert(k, (0.0, 0.0));
            }
        }
        if pairs.len() < 3 {
            return invalid("table needs at least two nonzero nodes");
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        for k in 1..n - 1 {
            let (a, b) = (delta[k - 1], delta[k]);
            if a * b > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / a + w2 / b);
            }
        }
        let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
            let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s.signum() != d0.signum() {
                0.0
            } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                s
            }
        };
        d[0] = end(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        let mut cum = vec![0.0; n];
        for k in 0..n - 1 {
            cum[k + 1] =
                cum[k] + h[k] * ((y[k] + y[k + 1]) / 2.0 + h[k] * (d[k] - d[k + 1]) / 12.0);
        }
        let zero = x
            .iter()
            .position(|&v| v == 0.0)
            .expect("zero node inserted");
        Ok(Pchip { x, y, d, cum, zero })
    }

    fn cell(&self, s: f64) -> Option<usize> {
        let n = self.x.len();
        if !(s >= self.x[0] && s <= self.x[n - 1]) {
            return None;
        }
        Some(self.x.partition_point(|&v| v <= s).clamp(1, n - 1) - 1)
    }

    fn eval(&self, s: f64) -> f64 {
        let Some(k) = self.cell(s) else {
            return f64::NAN;
        };
        let h = self.x[k + 1] - self.x[k];
        let t = (s - self.x[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        self.y[k] * (2.0 * t3 - 3.0 * t2 + 1.0)
            + h * self.d[k] * (t3 - 2.0 * t2 + t)
            + self.y[k + 1] * (3.0 * t2 - 2.0 * t3)
            + h * self.d[k + 1] * (t3 - t2)
    }

    fn integral(&self, s: f64) -> f64 {
        let Some(k) = self.cell(s) else {
            return f64::NAN;
        };
        let h = self.x[k + 1] - self.x[k];
        let t = (s - self.x[k]) / h;
        let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
        let partial = h
            * (self.y[k] * (t4 / 2.0 - t3 + t)
                + h * self.d[k] * (t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0)
                + self.y[k + 1] * (t3 - t4 / 2.0)
                + h * self.d[k + 1] * (t4 / 4.0 - t3 / 3.0));
        self.cum[k] - self.cum[self.zero] + partial
    }
}

/// Uniform probe grid on `[−1, 1]` with `points` nodes.
pub fn uniform_probe_grid(points: usize) -> Vec<f64> {
    let n = points.max(2) - 1;
    (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect()
}

/// `±2^{−j}` for `j = j0..=j1`.
pub fn dyadic_points(j0: i32, j1: i32) -> Vec<f64> {
    (j0..=j1)
        .flat_map(|j| [2f64.powi(-j), -(2f64.powi(-j))])
        .collect()
}

/// The lattice of candidate exponents `ν ∈ {0, 0.05, …, 0.95}`.
pub fn nu_lattice() -> Vec<f64> {
    (0..20).map(|k| k as f64 / 20.0).collect()
}

/// Limit of `f(s)/s`, growth exponent and constant near zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct H0Estimate {
    /// `lim f(s)/s`; `−∞` when the quotient diverges downward.
    #[serde(serialize_with = "crate::report::ser_extended")]
    pub limit: f64,
    pub nu: f64,
    pub c1: f64,
}

fn check_finite(f: &Nonlinearity, s: f64) -> Result<f64> {
    let v = f.f(s);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(format!("f({s}) = {v} is not finite")))
    }
}

fn one_sided_limit(f: &Nonlinearity, sign: f64) -> Result<f64> {
    let a: Vec<f64> = (4..=40)
        .map(|j| {
            let s = sign * 2f64.powi(-j);
            check_finite(f, s).map(|v| v / s)
        })
        .collect::<Result<_>>()?;
    let tail = &a[a.len() - 10..];
    let last = *tail.last().expect("non-empty tail");
    if tail.windows(2).all(|w| w[1] < w[0]) && last < -1e6 {
        return Ok(f64::NEG_INFINITY);
    }
    if tail.windows(2).all(|w| w[1] > w[0]) && last > 1e6 {
        return Ok(f64::INFINITY);
    }
    let n = a.len();
    Ok(2.0 * a[n - 1] - a[n - 2])
}

/// Estimates the limit `L` of `f(s)/s` by Richardson extrapolation on
/// `s = ±2^{−j}`, `j = 4…40`, then the smallest lattice `ν` with
/// `|f(s)| ≤ C₁|s|^{1−ν}` bounded on the probe grid and the dyadic points.
///
/// A lattice `ν` counts as bounded when the log-slope of the ratio over the
/// ten smallest dyadic points is above `−0.01` on both sides.
pub fn estimate_h0(f: &Nonlinearity, probe: &[f64], lambda1: f64) -> Result<H0Estimate> {
    let mut pts: Vec<f64> = probe
        .iter()
        .copied()
        .filter(|s| *s != 0.0 && s.abs() <= 1.0)
        .collect();
    pts.extend(dyadic_points(1, 40));
    let vals: Vec<f64> = pts
        .iter()
        .map(|&s| check_finite(f, s))
        .collect::<Result<_>>()?;

    let right = one_sided_limit(f, 1.0)?;
    let left = one_sided_limit(f, -1.0)?;
    let limit = if right == left {
        right
    } else if right.is_finite()
        && left.is_finite()
        && (right - left).abs() <= 1e-6 * (1.0 + right.abs())
    {
        (right + left) / 2.0
    } else {
        return Err(Error::Hypothesis(format!(
            "f(s)/s has different one-sided limits at 0: {right} and {left}"
        )));
    };
    if !(limit < lambda1) {
        return Err(Error::Hypothesis(format!(
            "lim f(s)/s = {limit} is not below λ₁ = {lambda1}"
        )));
    }

    let tail: Vec<f64> = (31..=40).map(|j| 2f64.powi(-j)).collect();
    for nu in nu_lattice() {
        let bounded = [1.0, -1.0].iter().all(|&sign| {
            let logs: Vec<(f64, f64)> = tail
                .iter()
                .map(|&s| {
                    let r = f.f(sign * s).abs() / s.powf(1.0 - nu);
                    (s.ln(), r.max(f64::MIN_POSITIVE).ln())
                })
                .collect();
            slope(&logs) >= -0.01
        });
        if !bounded {
            continue;
        }
        let c1 = pts
            .iter()
            .zip(&vals)
            .map(|(s, v)| v.abs() / s.abs().powf(1.0 - nu))
            .fold(0.0, f64::max);
        if c1.is_finite() {
            return Ok(H0Estimate { limit, nu, c1 });
        }
    }
    Err(Error::Hypothesis(
        "no ν in the lattice {0, 0.05, …, 0.95} bounds |f(s)|/|s|^{1−ν} near 0".into(),
    ))
}

/// Least-squares slope of `y` against `x`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Outcome of one inequality checked on a probe grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub passed: bool,
    /// Point with the largest violation, if any.
    pub witness: Option<f64>,
    pub worst_violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct H1Report {
    pub structure: InequalityCheck,
    pub growth: InequalityCheck,
    /// Best `C₀` in `f(s)s ≥ C₀|s|^{q+1}` on `|s| ≤ s₀`.
    pub c0: f64,
    pub global_growth: InequalityCheck,
    /// Best `C` in `f(s)s ≥ C|s|^{q+1}` over the whole probe grid.
    pub global_constant: f64,
    pub passed: bool,
}

const H1_REL_TOL: f64 = 1e-9;

fn scan(name: &str, pts: &[f64], margin: impl Fn(f64) -> (f64, f64)) -> InequalityCheck {
    let mut witness = None;
    let mut worst = 0.0;
    for &s in pts {
        let (m, scale) = margin(s);
        let violation = -m - H1_REL_TOL * scale;
        if violation > 0.0 && -m > worst {
            worst = -m;
            witness = Some(s);
        }
    }
    InequalityCheck {
        name: name.into(),
        passed: witness.is_none(),
        witness,
        worst_violation: worst,
    }
}

/// Checks `f(s)s − (q+1)F(s) ≥ 0` on the probe grid, `f(s)s ≥ C₀|s|^{q+1}`
/// on `|s| ≤ s₀`, and the global lower bound `C|s|^{q+1} ≤ f(s)s`.
///
/// Points are scanned positive side first, so ties in the witness favor
/// `s > 0`.
pub fn check_h1(
    f: &Nonlinearity,
    q: f64,
    critical: f64,
    s0: f64,
    probe: &[f64],
) -> Result<H1Report> {
    if !(q > critical) {
        return invalid(format!(
            "q = {q} must exceed the critical exponent {critical}"
        ));
    }
    if !(s0 > 0.0) {
        return invalid(format!("s₀ = {s0} must be positive"));
    }
    let mut pts: Vec<f64> = probe
        .iter()
        .copied()
        .filter(|&s| s != 0.0 && s.is_finite())
        .collect();
    pts.sort_by(|a, b| {
        (b.is_sign_positive().cmp(&a.is_sign_positive())).then(a.abs().total_cmp(&b.abs()))
    });
    for &s in &pts {
        check_finite(f, s)?;
    }
    let structure = scan("f(s)s - (q+1)F(s) >= 0", &pts, |s| {
        let fs = f.f(s) * s;
        let big = (q + 1.0) * f.primitive(s);
        (fs - big, fs.abs() + big.abs())
    });
    let ratio = |s: f64| f.f(s) * s / s.abs().powf(q + 1.0);
    let near: Vec<f64> = pts.iter().copied().filter(|s| s.abs() <= s0).collect();
    let c0 = near.iter().map(|&s| ratio(s)).fold(f64::INFINITY, f64::min);
    let growth = positive_constant("f(s)s >= C0|s|^(q+1) on |s| <= s0", &near, &ratio, c0);
    let global_constant = pts.iter().map(|&s| ratio(s)).fold(f64::INFINITY, f64::min);
    let global_growth = positive_constant("f(s)s >= C|s|^(q+1)", &pts, &ratio, global_constant);
    let passed = structure.passed && growth.passed && global_growth.passed;
    Ok(H1Report {
        structure,
        growth,
        c0,
        global_growth,
        global_constant,
        passed,
    })
}

fn positive_constant(
    name: &str,
    pts: &[f64],
    ratio: &impl Fn(f64) -> f64,
    best: f64,
) -> InequalityCheck {
    if pts.is_empty() {
        return InequalityCheck {
            name: name.into(),
            passed: false,
            witness: None,
            worst_violation: f64::NAN,
        };
    }
    let passed = best > 0.0 && best.is_finite();
    let witness = if passed {
        None
    } else {
        pts.iter().copied().find(|&s| ratio(s) == best)
    };
    InequalityCheck {
        name: name.into(),
        passed,
        witness,
        worst_violation: if passed { 0.0 } else { -best },
    }
}

/// `f(s)s > 0` for `0 < |s| ≤ 1` on the probe grid.
pub fn check_sign_condition(f: &Nonlinearity, probe: &[f64]) -> Result<()> {
    for &s in probe.iter().filter(|s| **s != 0.0 && s.abs() <= 1.0) {
        let v = check_finite(f, s)? * s;
        if !(v > 0.0) {
            return Err(Error::Hypothesis(format!("f(s)s = {v:e} ≤ 0 at s = {s}")));
        }
    }
    Ok(())
}

/// Constants fixing the cut-off.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationParams {
    pub s0p: f64,
    pub eps0: f64,
    pub nu: f64,
    pub c1: f64,
    pub lambda1: f64,
    #[serde(serialize_with = "crate::report::ser_extended")]
    pub limit: f64,
}

impl TruncationParams {
    /// `(λ₁ − ε₀)/2`, the quadratic bound on `F_α`.
    pub fn quadratic_bound(&self) -> f64 {
        (self.lambda1 - self.eps0) / 2.0
    }
}

/// Largest dyadic candidate `s′₀ = 2^{−j}` tried first.
pub const CALIBRATION_MAX_J: i32 = 20;

fn calibration_grid(s0p: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = (1..=2000).map(|i| s0p * i as f64 / 2000.0).collect();
    pts.extend((1..=40).map(|j| s0p * 2f64.powi(-j)));
    let neg: Vec<f64> = pts.iter().map(|s| -s).collect();
    pts.extend(neg);
    pts
}

/// Chooses `ε₀` at the midpoint of the admissible gap and the largest
/// dyadic `s′₀` for which the quadratic bound on `F` and on the cut-off
/// primitive, and the `|s|^{2−ν}` bounds on `f(s)s` and `F`, hold on a dense
/// grid of `[−s′₀, s′₀]`.
pub fn calibrate_truncation(
    f: &Arc<Nonlinearity>,
    h0: &H0Estimate,
    lambda1: f64,
) -> Result<TruncationParams> {
    if !(lambda1 > 0.0 && lambda1.is_finite()) {
        return invalid(format!("λ₁ = {lambda1} must be positive"));
    }
    if !(h0.limit < lambda1) {
        return Err(Error::Hypothesis(format!(
            "lim f(s)/s = {} is not below λ₁ = {lambda1}",
            h0.limit
        )));
    }
    let lplus = h0.limit.max(0.0);
    let eps0 = lambda1.min(1.0) * (1.0 - lplus / lambda1) / 2.0;
    let bound = (lambda1 - eps0) / 2.0;
    let c = h0.c1 * (1.0 + 1e-9);
    for j in 1..=CALIBRATION_MAX_J {
        let s0p = 2f64.powi(-j);
        let phi = PhiTable::new(f, s0p);
        let ok = calibration_grid(s0p).into_iter().all(|s| {
            let fv = f.f(s);
            let big = f.primitive(s);
            let cap = c * s.abs().powf(2.0 - h0.nu) + 1e-300;
            let quad = bound * s * s * (1.0 + 1e-12);
            big <= quad && phi.eval(s) <= quad && (fv * s).abs() <= cap && big.abs() <= cap
        });
        if ok {
            return Ok(TruncationParams {
                s0p,
                eps0,
                nu: h0.nu,
                c1: h0.c1,
                lambda1,
                limit: h0.limit,
            });
        }
    }
    Err(Error::Hypothesis(format!(
        "no s′₀ = 2^-j, j ≤ {CALIBRATION_MAX_J}, satisfies the small-amplitude bounds"
    )))
}

/// Cubic smoothstep cut-off: `1` on `|s| ≤ s′₀/2`, `0` on `|s| ≥ s′₀`.
pub fn cutoff_theta(s: f64, s0p: f64) -> f64 {
    let t = (2.0 * s.abs() / s0p - 1.0).clamp(0.0, 1.0);
    1.0 - 3.0 * t * t + 2.0 * t * t * t
}

pub fn cutoff_theta_prime(s: f64, s0p: f64) -> f64 {
    let raw = 2.0 * s.abs() / s0p - 1.0;
    if !(0.0..1.0).contains(&raw) {
        return 0.0;
    }
    (-6.0 * raw + 6.0 * raw * raw) * 2.0 / s0p * s.signum()
}

/// Cells per side in the table of `Φ(x) = ∫₀ˣ θf`.
pub const PHI_CELLS: usize = 1024;

/// Cumulative table of `Φ(x) = ∫₀ˣ θ(t)f(t) dt` on `[−s′₀, s′₀]`.
#[derive(Clone, Debug)]
struct PhiTable {
    base: Arc<Nonlinearity>,
    s0p: f64,
    h: f64,
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl PhiTable {
    fn new(base: &Arc<Nonlinearity>, s0p: f64) -> Self {
        let h = s0p / PHI_CELLS as f64;
        let integrand = |t: f64| cutoff_theta(t, s0p) * base.f(t);
        let side = |sign: f64| {
            let mut cum = Vec::with_capacity(PHI_CELLS + 1);
            let mut acc = Neumaier::new();
            cum.push(0.0);
            for k in 0..PHI_CELLS {
                let (a, b) = (sign * k as f64 * h, sign * (k + 1) as f64 * h);
                let piece = if k == 0 {
                    adaptive(integrand, a, b, PRIMITIVE_TOL)
                } else {
                    gauss_legendre_8(a, b, integrand)
                };
                acc.add(piece);
                cum.push(acc.value());
            }
            cum
        };
        let pos = side(1.0);
        let neg = side(-1.0);
        PhiTable {
            base: base.clone(),
            s0p,
            h,
            pos,
            neg,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let (cum, sign) = if x >= 0.0 {
            (&self.pos, 1.0)
        } else {
            (&self.neg, -1.0)
        };
        let ax = x.abs();
        if ax >= self.s0p {
            return cum[PHI_CELLS];
        }
        let k = ((ax / self.h) as usize).min(PHI_CELLS - 1);
        let a = sign * k as f64 * self.h;
        let integrand = |t: f64| cutoff_theta(t, self.s0p) * self.base.f(t);
        let rest = if k == 0 {
            adaptive(integrand, 0.0, x, PRIMITIVE_TOL)
        } else {
            gauss_legendre_8(a, x, integrand)
        };
        cum[k] + rest
    }
}

/// The truncated nonlinearity at scale `α`.
#[derive(Clone, Debug)]
pub struct TruncatedNonlinearity {
    base: Arc<Nonlinearity>,
    params: TruncationParams,
    alpha: f64,
    p: f64,
    phi: PhiTable,
}

impl TruncatedNonlinearity {
    /// Accepts `α ∈ (0, 1]`; `α = 1` is the untruncated scale.
    pub fn new(
        base: Arc<Nonlinearity>,
        params: TruncationParams,
        alpha: f64,
        p: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return invalid(format!("α = {alpha} must lie in (0, 1]"));
        }
        if !(p > 0.0 && p.is_finite()) {
            return invalid(format!("p = {p} must be positive"));
        }
        if !(params.s0p > 0.0 && params.s0p < 1.0) {
            return invalid(format!("s′₀ = {} must lie in (0, 1)", params.s0p));
        }
        let phi = PhiTable::new(&base, params.s0p);
        Ok(TruncatedNonlinearity {
            base,
            params,
            alpha,
            p,
            phi,
        })
    }

    pub fn params(&self) -> &TruncationParams {
        &self.params
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn base(&self) -> &Arc<Nonlinearity> {
        &self.base
    }

    /// `|s| ≥ s′₀/α` is where `g_α` is the pure power.
    pub fn support_edge(&self) -> f64 {
        self.params.s0p / self.alpha
    }

    /// `θ(αs)f(αs)/α`; `f` is never evaluated where `|αs| ≥ s′₀`.
    pub fn f_alpha(&self, s: f64) -> f64 {
        let x = self.alpha * s;
        if x.abs() >= self.params.s0p {
            return 0.0;
        }
        cutoff_theta(x, self.params.s0p) * self.base.f(x) / self.alpha
    }

    /// `∫₀ˢ f_α = Φ(αs)/α²`.
    pub fn big_f_alpha(&self, s: f64) -> f64 {
        self.phi.eval(self.alpha * s) / (self.alpha * self.alpha)
    }

    pub fn g_alpha(&self, s: f64) -> f64 {
        self.f_alpha(s) + s.abs().powf(self.p - 1.0) * s
    }

    pub fn big_g_alpha(&self, s: f64) -> f64 {
        self.big_f_alpha(s) + s.abs().powf(self.p + 1.0) / (self.p + 1.0)
    }

    /// `g_α^+(s) = f_α(s₊) + s₊^p`.
    pub fn g_plus(&self, s: f64) -> f64 {
        self.g_alpha(s.max(0.0))
    }

    /// `g_α^−(s) = f_α(−s₋) − s₋^p`.
    pub fn g_minus(&self, s: f64) -> f64 {
        self.g_alpha(s.min(0.0))
    }

    pub fn view(&self, branch: Branch) -> TruncatedView<'_> {
        TruncatedView { tn: self, branch }
    }
}

/// Which of `g_α`, `g_α^+`, `g_α^−` a solve uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Full,
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug)]
pub struct TruncatedView<'a> {
    tn: &'a TruncatedNonlinearity,
    branch: Branch,
}

impl TruncatedView<'_> {
    fn clip(&self, s: f64) -> f64 {
        match self.branch {
            Branch::Full => s,
            Branch::Plus => s.max(0.0),
            Branch::Minus => s.min(0.0),
        }
    }
}

impl Nonlinear for TruncatedView<'_> {
    fn g(&self, s: f64) -> f64 {
        self.tn.g_alpha(self.clip(s))
    }

    fn primitive(&self, s: f64) -> f64 {
        self.tn.big_g_alpha(self.clip(s))
    }
}

impl Nonlinear for TruncatedNonlinearity {
    fn g(&self, s: f64) -> f64 {
        self.g_alpha(s)
    }

    fn primitive(&self, s: f64) -> f64 {
        self.big_g_alpha(s)
    }
}
