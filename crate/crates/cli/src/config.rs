//! Run configuration: TOML parsing, defaults and cross-field validation.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_rational::BigRational;
use polylab_core::exponents::{classify_p, parse_rational, to_f64, ProblemExponents};
use polylab_core::nonlinearity::{BuiltinSpec, Nonlinearity};
use polylab_core::operators::{BoundaryCondition, DomainSpec};
use polylab_core::solver::SolveConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Intervals used when `[domain]` is omitted.
pub const DEFAULT_INTERVALS: usize = 400;
pub const DEFAULT_PROBE_POINTS: usize = 2001;
pub const DEFAULT_RANDOM_PROBES: usize = 256;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "N")]
    n: u32,
    m: u32,
    p: Option<String>,
    q: Option<String>,
    bc: Option<BoundaryCondition>,
    seed: Option<u64>,
    alpha: Option<f64>,
    lambda: Option<f64>,
    domain: Option<DomainSpec>,
    nonlinearity: Option<toml::Value>,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    solver: SolveConfig,
}

/// Options of the `truncate`, `identity` and `sweep` subcommands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Uniform probe points on `[−1, 1]`.
    pub probe_points: usize,
    /// Extra seeded random probe points on `(−1, 1)`.
    pub random_probes: usize,
    /// Samples of the truncated nonlinearity written by `truncate`.
    pub samples: usize,
    /// Explicit `λ` grid for `sweep`.
    pub lambdas: Option<Vec<f64>>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    pub include_zero: bool,
    pub amplitude_cap: f64,
    /// `solution` or `paraboloid`.
    pub identity_field: IdentityField,
    /// Multiplier in the identity; `(N − 2m)/2` when absent.
    pub a: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            probe_points: DEFAULT_PROBE_POINTS,
            random_probes: DEFAULT_RANDOM_PROBES,
            samples: 2001,
            lambdas: None,
            lambda_min: 1e-2,
            lambda_max: 1e3,
            lambda_points: 12,
            include_zero: true,
            amplitude_cap: 1.0,
            identity_field: IdentityField::Solution,
            a: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityField {
    /// The certified solution of the existence pipeline.
    Solution,
    /// `u = R² − |x|²` on a ball (`x(ℓ − x)` on an interval) with constant
    /// `g = −Δu`.
    Paraboloid,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableSpec {
    #[allow(dead_code)]
    kind: String,
    path: PathBuf,
}

/// Where the nonlinearity came from, echoed in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum NonlinearitySource {
    Builtin(BuiltinSpec),
    Table { kind: &'static str, path: PathBuf },
}

/// A parsed and validated configuration with every default filled in.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub n: u32,
    pub m: u32,
    pub p: Option<String>,
    pub q: Option<String>,
    pub bc: BoundaryCondition,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub domain: DomainSpec,
    pub nonlinearity: NonlinearitySource,
    pub run: RunSection,
    pub solver: SolveConfig,
    #[serde(skip)]
    pub exponents: Option<ProblemExponents>,
    #[serde(skip)]
    pub f: Arc<Nonlinearity>,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn rational(key: &str, text: &str) -> Result<BigRational, CliError> {
    parse_rational(text).map_err(|e| bad(key, e))
}

/// Parses a configuration document. Relative table paths resolve against
/// `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;

    if raw.m == 0 {
        return Err(bad("m", "must be at least 1"));
    }
    if raw.n < 2 * raw.m + 1 {
        return Err(bad(
            "N",
            format!("N ≥ 2m+1 violated (N = {}, m = {})", raw.n, raw.m),
        ));
    }
    let bc = raw.bc.unwrap_or(BoundaryCondition::Dirichlet);
    if bc == BoundaryCondition::Dirichlet && raw.m > 2 {
        return Err(bad(
            "bc",
            format!("Dirichlet supported for m ≤ 2, got m = {}", raw.m),
        ));
    }

    let exponents = match &raw.p {
        Some(p) => {
            let p = rational("p", p)?;
            let q = raw.q.as_deref().map(|q| rational("q", q)).transpose()?;
            Some(ProblemExponents::new(raw.n, raw.m, p, q).map_err(|e| bad("p", e))?)
        }
        None => {
            if raw.q.is_some() {
                return Err(bad("q", "given without p"));
            }
            None
        }
    };

    let domain = raw
        .domain
        .unwrap_or_else(|| DomainSpec::ball(1.0, raw.n, DEFAULT_INTERVALS));
    domain.validate().map_err(|e| bad("domain", e))?;
    if let DomainSpec::Ball { dim, .. } = domain {
        if dim != raw.n {
            return Err(bad(
                "domain.dim",
                format!("ball dimension {dim} must equal N = {}", raw.n),
            ));
        }
    }

    if raw.alpha.is_some() && raw.lambda.is_some() {
        return Err(bad("alpha", "give either alpha or lambda, not both"));
    }
    if let Some(a) = raw.alpha {
        if !(a > 0.0 && a <= 1.0) {
            return Err(bad("alpha", format!("{a} must lie in (0, 1]")));
        }
    }
    if let Some(l) = raw.lambda {
        if !(l >= 1.0 && l.is_finite()) {
            return Err(bad(
                "lambda",
                format!("{l} must be at least 1 so that alpha ≤ 1"),
            ));
        }
    }

    let (nonlinearity, f) = match raw.nonlinearity {
        None => (
            NonlinearitySource::Builtin(BuiltinSpec::Zero),
            Nonlinearity::zero(),
        ),
        Some(v) => {
            let is_table = v.get("kind").and_then(|k| k.as_str()) == Some("table");
            if is_table {
                let spec: TableSpec = v.try_into().map_err(|e| bad("nonlinearity", e))?;
                let path = base.join(&spec.path);
                let file = std::fs::File::open(&path)
                    .map_err(|e| bad("nonlinearity.path", format!("{}: {e}", path.display())))?;
                let f = Nonlinearity::sampled_csv(file).map_err(|e| bad("nonlinearity.path", e))?;
                (
                    NonlinearitySource::Table {
                        kind: "table",
                        path: spec.path,
                    },
                    f,
                )
            } else {
                let spec: BuiltinSpec = v.try_into().map_err(|e| bad("nonlinearity", e))?;
                let f = Nonlinearity::builtin(spec.clone()).map_err(|e| bad("nonlinearity", e))?;
                (NonlinearitySource::Builtin(spec), f)
            }
        }
    };

    raw.solver.validate().map_err(|e| bad("solver", e))?;
    let run = raw.run;
    if run.probe_points < 3 {
        return Err(bad("run.probe_points", "must be at least 3"));
    }
    if run.samples < 2 {
        return Err(bad("run.samples", "must be at least 2"));
    }
    if run.lambdas.is_none() {
        if !(run.lambda_min > 0.0 && run.lambda_max > run.lambda_min) {
            return Err(bad("run.lambda_min", "need 0 < lambda_min < lambda_max"));
        }
        if run.lambda_points < 2 {
            return Err(bad("run.lambda_points", "must be at least 2"));
        }
    }

    Ok(RunConfig {
        n: raw.n,
        m: raw.m,
        p: raw.p,
        q: raw.q,
        bc,
        seed: raw.seed.unwrap_or(0),
        alpha: raw.alpha,
        lambda: raw.lambda,
        domain,
        nonlinearity,
        run,
        solver: raw.solver,
        exponents,
        f: Arc::new(f),
    })
}

impl RunConfig {
    pub fn exponents(&self) -> Result<&ProblemExponents, CliError> {
        self.exponents
            .as_ref()
            .ok_or_else(|| bad("p", "required for this command"))
    }

    pub fn p_f64(&self) -> Result<f64, CliError> {
        Ok(to_f64(self.exponents()?.p()))
    }

    pub fn q(&self) -> Result<&BigRational, CliError> {
        self.exponents()?
            .q()
            .ok_or_else(|| bad("q", "required for this command"))
    }

    /// `p` must satisfy `1 < p < critical`.
    pub fn require_existence_p(&self) -> Result<(), CliError> {
        let class = classify_p(self.exponents()?);
        if class.admits_existence() {
            Ok(())
        } else {
            Err(bad(
                "p",
                format!("needs 1 < p < critical, got class {class:?}"),
            ))
        }
    }

    /// `p` must satisfy `1 ≤ p < critical`.
    pub fn require_nonexistence_p(&self) -> Result<(), CliError> {
        let class = classify_p(self.exponents()?);
        if class.admits_nonexistence() {
            Ok(())
        } else {
            Err(bad(
                "p",
                format!("needs 1 ≤ p < critical, got class {class:?}"),
            ))
        }
    }

    /// `α` from the config, converting `λ` if given; defaults to `1`.
    pub fn alpha(&self) -> Result<f64, CliError> {
        match (self.alpha, self.lambda) {
            (Some(a), _) => Ok(a),
            (None, Some(l)) => polylab_core::exponents::scaling_alpha(l, self.p_f64()?)
                .map_err(|e| bad("lambda", e)),
            (None, None) => Ok(1.0),
        }
    }

    /// The `λ` grid of a sweep.
    pub fn lambda_grid(&self) -> Vec<f64> {
        if let Some(l) = &self.run.lambdas {
            return l.clone();
        }
        let r = &self.run;
        let (lo, hi) = (r.lambda_min.ln(), r.lambda_max.ln());
        let mut grid: Vec<f64> = (0..r.lambda_points)
            .map(|k| (lo + (hi - lo) * k as f64 / (r.lambda_points - 1) as f64).exp())
            .collect();
        if r.include_zero {
            grid.insert(0, 0.0);
        }
        grid
    }
}
