//! Exact exponent calculus.
//!
//! Everything here works in arbitrary-precision rationals: the bootstrap chain
//! branches on the comparison `2m·q` against `N`, and that comparison must be
//! exact on the conformal boundary. Floating point only appears when a value is
//! serialized for display.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Hard cap on bootstrap iterations. Reaching it means `p` was not
/// strictly subcritical.
pub const MAX_CHAIN_STEPS: usize = 1000;

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Dimension, operator order and the two exponents of a problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemExponents {
    dim: u32,
    order: u32,
    p: BigRational,
    q: Option<BigRational>,
}

impl ProblemExponents {
    /// Validates `N ≥ 2m + 1`, `m ≥ 1`, `p > 0` and `q > 0` when present.
    pub fn new(dim: u32, order: u32, p: BigRational, q: Option<BigRational>) -> Result<Self> {
        if order == 0 {
            return invalid("operator order m must be at least 1");
        }
        if dim < 3 {
            return invalid(format!("dimension N = {dim} must be at least 3"));
        }
        if dim < 2 * order + 1 {
            return invalid(format!("N ≥ 2m+1 violated (N = {dim}, m = {order})"));
        }
        if !p.is_positive() {
            return invalid(format!("p = {p} must be positive"));
        }
        if let Some(q) = &q {
            if !q.is_positive() {
                return invalid(format!("q = {q} must be positive"));
            }
        }
        Ok(ProblemExponents { dim, order, p, q })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn p(&self) -> &BigRational {
        &self.p
    }

    pub fn q(&self) -> Option<&BigRational> {
        self.q.as_ref()
    }

    fn n(&self) -> BigRational {
        int(self.dim as i64)
    }

    fn two_m(&self) -> BigRational {
        int(2 * self.order as i64)
    }

    /// `(N + 2m) / (N − 2m)`.
    pub fn critical(&self) -> BigRational {
        let n = self.n();
        let tm = self.two_m();
        (&n + &tm) / (&n - &tm)
    }
}

/// Critical Sobolev exponent `(N+2m)/(N−2m)`; rejects `N ≤ 2m`.
pub fn critical_exponent(dim: u32, order: u32) -> Result<BigRational> {
    if order == 0 || dim <= 2 * order {
        return invalid(format!(
            "critical exponent undefined for N = {dim}, m = {order} (needs N > 2m)"
        ));
    }
    let n = int(dim as i64);
    let tm = int(2 * order as i64);
    Ok((&n + &tm) / (&n - &tm))
}

/// Where `p` sits relative to `1` and the critical exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PClass {
    /// `0 < p < 1`; outside both admissible ranges.
    Sublinear,
    /// `p = 1`: admissible for nonexistence only.
    WideSubcritical,
    /// `1 < p < critical`: admissible for existence and nonexistence.
    StrictSubcritical,
    Critical,
    Supercritical,
}

impl PClass {
    pub fn admits_existence(self) -> bool {
        self == PClass::StrictSubcritical
    }

    pub fn admits_nonexistence(self) -> bool {
        matches!(self, PClass::StrictSubcritical | PClass::WideSubcritical)
    }
}

pub fn classify_p(pe: &ProblemExponents) -> PClass {
    let one = BigRational::one();
    let crit = pe.critical();
    let p = pe.p();
    if *p < one {
        PClass::Sublinear
    } else if *p == one {
        PClass::WideSubcritical
    } else if *p < crit {
        PClass::StrictSubcritical
    } else if *p == crit {
        PClass::Critical
    } else {
        PClass::Supercritical
    }
}

/// Which side of the conformal line `2mq = N` an integrability exponent is on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `2mq < N`: Sobolev embedding into `L^{qN/(N−2mq)}`.
    Subconformal,
    /// `2mq = N`: embedding into `L^{p(N+1)/(2m)}`.
    Conformal,
    /// `2mq > N`: Hölder regularity, the chain stops.
    Terminal,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepResult {
    Next { q_star: BigRational, branch: Branch },
    RegularityReached,
}

fn branch_of(q: &BigRational, pe: &ProblemExponents) -> Branch {
    let lhs = pe.two_m() * q;
    let n = pe.n();
    if lhs < n {
        Branch::Subconformal
    } else if lhs == n {
        Branch::Conformal
    } else {
        Branch::Terminal
    }
}

/// One application of the `W^{2m,q}` embedding to an integrability exponent.
pub fn sobolev_step(q: &BigRational, pe: &ProblemExponents) -> Result<StepResult> {
    if *q <= BigRational::one() {
        return invalid(format!("Sobolev step needs q > 1, got {q}"));
    }
    let branch = branch_of(q, pe);
    Ok(match branch {
        Branch::Subconformal => {
            let n = pe.n();
            let q_star = q * &n / (&n - pe.two_m() * q);
            StepResult::Next { q_star, branch }
        }
        Branch::Conformal => {
            let q_star = pe.p() * (pe.n() + BigRational::one()) / pe.two_m();
            StepResult::Next { q_star, branch }
        }
        Branch::Terminal => StepResult::RegularityReached,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainEntry {
    pub q: BigRational,
    pub branch: Branch,
}

/// Full record of the bootstrap for one `(N, m, p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentLedger {
    pub critical: BigRational,
    pub chain: Vec<ChainEntry>,
    /// Number of subconformal entries. When no conformal step occurs this is
    /// the index with `2mq_{k0} < N < 2mq_{k0+1}`.
    pub k0: usize,
    /// Number of embedding steps actually taken (`chain.len() - 1`).
    pub steps: usize,
    /// Closed-form value `2mp/(N(p−1))` of the affine recursion's fixed point.
    pub fixed_point: BigRational,
    /// Number of subconformal steps whose closed form was checked exactly.
    pub closed_form_checks: usize,
    pub gamma_paper: Option<BigRational>,
    pub gamma_iterated: BigRational,
    pub nu_lower: BigRational,
    pub beta_paper: Option<BigRational>,
}

/// First integrability exponent `2N / (p(N − 2m))` from the energy bound.
pub fn first_exponent(pe: &ProblemExponents) -> BigRational {
    let n = pe.n();
    int(2) * &n / (pe.p() * (&n - pe.two_m()))
}

/// Iterates the growth bound and the Sobolev embedding until `2mq > N`.
///
/// The recursion `1/q_{k+1} = p/q_k − 2mp/N` is cross-checked against its
/// closed form `p^k (1/q₁ − c) + c`, `c = 2mp/(N(p−1))`, on every step
/// reached through subconformal entries only.
pub fn bootstrap_chain(pe: &ProblemExponents) -> Result<ExponentLedger> {
    let class = classify_p(pe);
    if !class.admits_existence() {
        return invalid(format!(
            "bootstrap needs 1 < p < {}, got p = {} ({class:?})",
            pe.critical(),
            pe.p()
        ));
    }
    let p = pe.p().clone();
    let one = BigRational::one();
    let fixed_point = pe.two_m() * &p / (pe.n() * (&p - &one));
    let q1 = first_exponent(pe);
    let inv_q1 = q1.recip();

    let mut chain = vec![ChainEntry {
        q: q1.clone(),
        branch: branch_of(&q1, pe),
    }];
    let mut all_subconformal = true;
    let mut closed_form_checks = 0;
    loop {
        if chain.len() > MAX_CHAIN_STEPS {
            return Err(Error::Internal(format!(
                "bootstrap chain exceeded {MAX_CHAIN_STEPS} steps for p = {}",
                pe.p()
            )));
        }
        let last = chain.last().expect("chain is never empty").clone();
        match sobolev_step(&last.q, pe)? {
            StepResult::RegularityReached => break,
            StepResult::Next { q_star, branch } => {
                let next = &q_star / &p;
                if next <= last.q {
                    return Err(Error::Internal(format!(
                        "chain not increasing: {} after {}",
                        next, last.q
                    )));
                }
                all_subconformal &= branch == Branch::Subconformal;
                if all_subconformal {
                    let k = chain.len() as i32;
                    let closed = p.pow(k) * (&inv_q1 - &fixed_point) + &fixed_point;
                    if closed != next.recip() {
                        return Err(Error::Internal(format!(
                            "closed form disagrees with iteration at step {k}: {} vs {}",
                            closed,
                            next.recip()
                        )));
                    }
                    closed_form_checks += 1;
                }
                let branch = branch_of(&next, pe);
                chain.push(ChainEntry { q: next, branch });
            }
        }
    }

    let k0 = chain
        .iter()
        .filter(|e| e.branch == Branch::Subconformal)
        .count();
    let steps = chain.len() - 1;
    let (gamma_paper, gamma_iterated, nu_lower) = gamma_and_nu(pe, steps)?;
    let beta_paper = beta_paper(pe);

    Ok(ExponentLedger {
        critical: pe.critical(),
        chain,
        k0,
        steps,
        fixed_point,
        closed_form_checks,
        gamma_paper,
        gamma_iterated,
        nu_lower,
        beta_paper,
    })
}

/// The Lemma's closed-form `γ` (when `2m·q₁ < N`), the exponent obtained by
/// tracking powers of `α` through `steps` embedding steps, and the
/// conservative `ν̲ = 1/max(γ)`.
pub fn gamma_and_nu(
    pe: &ProblemExponents,
    steps: usize,
) -> Result<(Option<BigRational>, BigRational, BigRational)> {
    let one = BigRational::one();
    let p = pe.p();
    if *p == one {
        return invalid("γ is undefined for p = 1");
    }
    let n = pe.n();
    let tm = pe.two_m();
    let pm1 = p - &one;

    let q1 = first_exponent(pe);
    let gamma_paper = if &tm * &q1 < n {
        let lead = &tm * p * p * p / (&n * &pm1);
        let gap = &tm / (&n * &pm1) - (&n - &tm) / (int(2) * &n);
        if gap.is_zero() {
            None
        } else {
            Some(lead / gap)
        }
    } else {
        None
    };

    // e₀ from the energy bound inserted in the first growth estimate,
    // then e ↦ 1 + p·e for each further embedding step.
    let mut e = &one + p / int(2);
    for _ in 0..steps {
        e = &one + p * &e;
    }
    let gamma_iterated = e;

    let worst = match &gamma_paper {
        Some(g) if *g > gamma_iterated => g.clone(),
        _ => gamma_iterated.clone(),
    };
    if !worst.is_positive() {
        return Err(Error::Internal(format!("non-positive γ = {worst}")));
    }
    Ok((gamma_paper, gamma_iterated, worst.recip()))
}

/// The printed `β = (2mp/(N(p−1))) (2mp/(p−1) − 1/q₁)^{−1}`, reported
/// verbatim for comparison with the iteration-derived `k₀`.
pub fn beta_paper(pe: &ProblemExponents) -> Option<BigRational> {
    let one = BigRational::one();
    let p = pe.p();
    if *p == one {
        return None;
    }
    let pm1 = p - &one;
    let lead = pe.two_m() * p / (pe.n() * &pm1);
    let second = pe.two_m() * p / &pm1 - first_exponent(pe).recip();
    if second.is_zero() {
        None
    } else {
        Some(lead / second)
    }
}

/// Exponent governing the nonexistence threshold.
#[derive(Clone, Debug, PartialEq)]
pub enum Delta {
    /// `δ = ((p+1)/(q−p) + (p+1)/(p−1))^{−1}` for `p > 1`.
    Power(BigRational),
    /// `p = 1`: the threshold is `1/C` directly.
    Linear,
}

pub fn nonexistence_delta(p: &BigRational, q: &BigRational) -> Result<Delta> {
    let one = BigRational::one();
    if *p < one {
        return invalid(format!("nonexistence threshold needs p ≥ 1, got {p}"));
    }
    if q <= p {
        return invalid(format!(
            "nonexistence threshold needs q > p, got q = {q}, p = {p}"
        ));
    }
    if *p == one {
        return Ok(Delta::Linear);
    }
    let pp1 = p + &one;
    let inv = &pp1 / (q - p) + &pp1 / (p - &one);
    Ok(Delta::Power(inv.recip()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "branch", rename_all = "kebab-case")]
pub enum LowerThreshold {
    /// `λ̲ = (C₂/C₁)^δ`.
    Power { delta: f64, value: f64 },
    /// `p = 1`: `λ̲ = 1/C`.
    Linear { value: f64 },
}

impl LowerThreshold {
    pub fn value(&self) -> f64 {
        match self {
            LowerThreshold::Power { value, .. } | LowerThreshold::Linear { value } => *value,
        }
    }
}

/// `λ̲` from the two constants of the upper and lower integral bounds.
///
/// For `p = 1` only one constant enters; it is read from `c1`.
pub fn lambda_lower(c1: f64, c2: f64, p: &BigRational, q: &BigRational) -> Result<LowerThreshold> {
    let positive = |c: f64| c.is_finite() && c > 0.0;
    match nonexistence_delta(p, q)? {
        Delta::Linear => {
            if !positive(c1) {
                return invalid(format!("constant C = {c1} must be positive"));
            }
            Ok(LowerThreshold::Linear { value: 1.0 / c1 })
        }
        Delta::Power(delta) => {
            if !positive(c1) || !positive(c2) {
                return invalid(format!("constants C1 = {c1}, C2 = {c2} must be positive"));
            }
            let delta = to_f64(&delta);
            Ok(LowerThreshold::Power {
                delta,
                value: (c2 / c1).powf(delta),
            })
        }
    }
}

/// `α = λ^{−1/(p−1)}`.
pub fn scaling_alpha(lambda: f64, p: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return invalid(format!("scaling needs λ > 0, got {lambda}"));
    }
    if !(p > 1.0) {
        return invalid(format!("scaling is degenerate for p = {p} ≤ 1"));
    }
    Ok(lambda.powf(-1.0 / (p - 1.0)))
}

/// `λ = α^{1−p}`, the inverse of [`scaling_alpha`].
pub fn scaling_lambda(alpha: f64, p: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return invalid(format!("scaling needs α ∈ (0, 1], got {alpha}"));
    }
    if !(p > 1.0) {
        return invalid(format!("scaling is degenerate for p = {p} ≤ 1"));
    }
    Ok(alpha.powf(1.0 - p))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn parse_rational(text: &str) -> Result<BigRational> {
    text.trim()
        .parse::<BigRational>()
        .map_err(|e| Error::InvalidInput(format!("cannot parse rational {text:?}: {e}")))
}
