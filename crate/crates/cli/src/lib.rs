//! Command-line driver: parses a run configuration, executes one
//! subcommand and persists its artifacts in a fresh run directory.
//!
//! Each run directory holds `manifest.json` (configuration echo, versions,
//! timings, exit status), a deterministic `report.json`, and the CSV files
//! of the subcommand.

pub mod config;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_traits::Zero;
use polylab_core::exponents::{
    bootstrap_chain, classify_p, nonexistence_delta, to_f64, Delta, PClass,
};
use polylab_core::identity::{
    nonexistence_sweep, pucci_serrin, star_center, theorem_a_verdict, SweepProblem,
};
use polylab_core::nonlinearity::{
    calibrate_truncation, check_h1, estimate_h0, uniform_probe_grid, FnNonlinear, Perturbed,
    TruncatedNonlinearity,
};
use polylab_core::operators::{DomainSpec, GridField, PolyharmonicOperator};
use polylab_core::report::{ledger_table, write_table, CsvCell, LedgerRepr, RationalRepr};
use polylab_core::solver::{solve_existence, solve_two_signed, Outcome, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{parse_config, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] polylab_core::Error),
    #[error("{0}")]
    Failed(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const HYPOTHESIS: i32 = 4;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use polylab_core::Error as E;
        match self {
            CliError::Config(_) => exit::VALIDATION,
            CliError::Core(e) => match e {
                E::InvalidInput(_) | E::Unsupported(_) => exit::VALIDATION,
                E::Hypothesis(_) | E::Evaluation(_) => exit::HYPOTHESIS,
                E::Numerical(_) | E::Geometry(_) => exit::NUMERICAL,
                E::Internal(_) | E::Io(_) | E::Csv(_) => exit::INTERNAL,
            },
            CliError::Failed(_) => exit::NUMERICAL,
            CliError::Io(_) | CliError::Json(_) => exit::INTERNAL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Exponents,
    Truncate,
    Solve,
    TwoSolutions,
    Identity,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Exponents => "exponents",
            Command::Truncate => "truncate",
            Command::Solve => "solve",
            Command::TwoSolutions => "two-solutions",
            Command::Identity => "identity",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    /// Sweep threads; `0` uses all cores.
    pub jobs: usize,
}

#[derive(Debug)]
pub struct RunResult {
    pub exit_code: i32,
    pub run_dir: Option<PathBuf>,
    pub message: Option<String>,
}

/// What a subcommand produced: the report and the exit status it asks for.
struct Produced {
    report: Value,
    status: i32,
    note: Option<String>,
}

/// Reads the config, runs the subcommand, and writes the run directory.
pub fn execute(command: Command, opts: &Options) -> RunResult {
    let fail = |e: CliError| RunResult {
        exit_code: e.exit_code(),
        run_dir: None,
        message: Some(e.to_string()),
    };
    let text = match fs::read_to_string(&opts.config) {
        Ok(t) => t,
        Err(e) => {
            return fail(CliError::Config(format!("{}: {e}", opts.config.display())));
        }
    };
    let base = opts.config.parent().unwrap_or(Path::new("."));
    let mut cfg = match parse_config(&text, base) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let dir = match create_run_dir(&opts.out, command.name()) {
        Ok(d) => d,
        Err(e) => return fail(e.into()),
    };

    let start = Instant::now();
    let outcome = run_command(command, &cfg, opts, &dir);
    let elapsed = start.elapsed().as_secs_f64();

    let (exit_code, message) = match &outcome {
        Ok(p) => (p.status, p.note.clone()),
        Err(e) => (e.exit_code(), Some(e.to_string())),
    };
    if let Ok(p) = &outcome {
        if let Err(e) = write_json(&dir.join("report.json"), &p.report) {
            return RunResult {
                exit_code: e.exit_code(),
                run_dir: Some(dir),
                message: Some(e.to_string()),
            };
        }
    }
    let manifest = json!({
        "tool": "polylab",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": polylab_core::VERSION,
        "command": command,
        "config_path": opts.config,
        "config": cfg,
        "flags": { "seed": opts.seed, "jobs": opts.jobs },
        "timings": { "total_seconds": elapsed },
        "exit_code": exit_code,
        "message": message,
        "files": list_files(&dir),
    });
    if let Err(e) = write_json(&dir.join("manifest.json"), &manifest) {
        return RunResult {
            exit_code: e.exit_code(),
            run_dir: Some(dir),
            message: Some(e.to_string()),
        };
    }
    RunResult {
        exit_code,
        run_dir: Some(dir),
        message,
    }
}

fn list_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| e.file_name().into_string().ok())
        .chain(std::iter::once("manifest.json".to_string()))
        .collect();
    names.sort();
    names.dedup();
    names
}

/// Creates `<out>/<command>-NNN` with the first free counter.
pub fn create_run_dir(out: &Path, command: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(out)?;
    for k in 1..100_000u32 {
        let dir = out.join(format!("{command}-{k:03}"));
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    Err(std::io::Error::other("run directory counter exhausted"))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_field(path: &Path, field: &GridField) -> Result<(), CliError> {
    field.write_csv(BufWriter::new(fs::File::create(path)?))?;
    Ok(())
}

/// Uniform probe grid on `[−1, 1]` plus seeded random points, sorted.
pub fn probe_grid(cfg: &RunConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pts = uniform_probe_grid(cfg.run.probe_points);
    pts.extend((0..cfg.run.random_probes).map(|_| rng.gen_range(-1.0..1.0)));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn run_command(
    command: Command,
    cfg: &RunConfig,
    opts: &Options,
    dir: &Path,
) -> Result<Produced, CliError> {
    match command {
        Command::Exponents => exponents(cfg, dir),
        Command::Truncate => truncate(cfg, dir),
        Command::Solve => solve(cfg, dir),
        Command::TwoSolutions => two_solutions(cfg, dir),
        Command::Identity => identity(cfg, dir),
        Command::Sweep => sweep(cfg, opts, dir),
    }
}

fn ok(report: Value) -> Produced {
    Produced {
        report,
        status: exit::OK,
        note: None,
    }
}

fn exponents(cfg: &RunConfig, dir: &Path) -> Result<Produced, CliError> {
    let pe = cfg.exponents()?;
    let class = classify_p(pe);
    let ledger = bootstrap_chain(pe)?;
    fs::write(dir.join("ledger.txt"), ledger_table(&ledger))?;
    let delta = match pe.q() {
        Some(q) if q > pe.p() && class != PClass::Sublinear => {
            match nonexistence_delta(pe.p(), q)? {
                Delta::Power(d) => json!({ "branch": "power", "delta": RationalRepr::from(&d) }),
                Delta::Linear => json!({ "branch": "linear" }),
            }
        }
        _ => Value::Null,
    };
    Ok(ok(json!({
        "N": pe.dim(),
        "m": pe.order(),
        "p": RationalRepr::from(pe.p()),
        "q": pe.q().map(RationalRepr::from),
        "class": class,
        "ledger": LedgerRepr::from(&ledger),
        "delta": delta,
    })))
}

fn build_operator(cfg: &RunConfig) -> Result<PolyharmonicOperator, CliError> {
    Ok(PolyharmonicOperator::build(
        cfg.domain.clone(),
        cfg.m,
        cfg.bc,
    )?)
}

fn critical(cfg: &RunConfig) -> f64 {
    (cfg.n + 2 * cfg.m) as f64 / (cfg.n - 2 * cfg.m) as f64
}

fn truncate(cfg: &RunConfig, dir: &Path) -> Result<Produced, CliError> {
    let p = cfg.p_f64()?;
    let alpha = cfg.alpha()?;
    let op = build_operator(cfg)?;
    let eig = op.principal_eigenpair()?;
    let probe = probe_grid(cfg);
    let h0 = estimate_h0(&cfg.f, &probe, eig.lambda1)?;
    let params = calibrate_truncation(&cfg.f, &h0, eig.lambda1)?;
    let h1 = match cfg.exponents()?.q() {
        Some(q) => Some(check_h1(
            &cfg.f,
            to_f64(q),
            critical(cfg),
            params.s0p,
            &probe,
        )?),
        None => None,
    };
    let tn = TruncatedNonlinearity::new(cfg.f.clone(), params.clone(), alpha, p)?;

    let edge = tn.support_edge();
    let n = cfg.run.samples;
    let rows: Vec<Vec<CsvCell>> = (0..n)
        .map(|i| {
            let s = -2.0 * edge + 4.0 * edge * i as f64 / (n - 1) as f64;
            [
                s,
                tn.f_alpha(s),
                tn.big_f_alpha(s),
                tn.g_alpha(s),
                tn.big_g_alpha(s),
                tn.g_plus(s),
                tn.g_minus(s),
            ]
            .into_iter()
            .map(CsvCell::Num)
            .collect()
        })
        .collect();
    write_table(
        BufWriter::new(fs::File::create(dir.join("truncation.csv"))?),
        &[
            "s", "f_alpha", "F_alpha", "g_alpha", "G_alpha", "g_plus", "g_minus",
        ],
        &rows,
    )?;

    Ok(ok(json!({
        "nonlinearity": cfg.f.describe(),
        "lambda1": eig.lambda1,
        "h0": h0,
        "h1": h1,
        "truncation": params,
        "alpha": alpha,
        "p": p,
        "support_edge": edge,
    })))
}

fn problem(cfg: &RunConfig) -> Result<Problem, CliError> {
    cfg.require_existence_p()?;
    let ledger = bootstrap_chain(cfg.exponents()?)?;
    let gamma = match &ledger.gamma_paper {
        Some(g) if *g > ledger.gamma_iterated => to_f64(g),
        _ => to_f64(&ledger.gamma_iterated),
    };
    Ok(Problem {
        domain: cfg.domain.clone(),
        order: cfg.m,
        bc: cfg.bc,
        f: cfg.f.clone(),
        p: cfg.p_f64()?,
        alpha: cfg.alpha()?,
        gamma: Some(gamma),
    })
}

fn outcome_status(outcome: Outcome) -> (i32, Option<String>) {
    match outcome {
        Outcome::Certified => (exit::OK, None),
        Outcome::AlphaTooLarge => (
            exit::OK,
            Some("alpha too large: the solution reaches the cut-off".into()),
        ),
        Outcome::ResidualTooLarge => (
            exit::NUMERICAL,
            Some("untruncated residual above tolerance".into()),
        ),
        Outcome::NotConverged => (
            exit::NUMERICAL,
            Some("mountain pass did not converge".into()),
        ),
    }
}

fn solve(cfg: &RunConfig, dir: &Path) -> Result<Produced, CliError> {
    let problem = problem(cfg)?;
    let report = solve_existence(&problem, &probe_grid(cfg), &cfg.solver)?;
    write_field(&dir.join("u_alpha.csv"), &report.u_alpha)?;
    write_field(&dir.join("v.csv"), &report.v())?;
    let (status, note) = outcome_status(report.outcome);
    Ok(Produced {
        report: json!({ "solve": report }),
        status,
        note,
    })
}

fn two_solutions(cfg: &RunConfig, dir: &Path) -> Result<Produced, CliError> {
    let problem = problem(cfg)?;
    let report = solve_two_signed(&problem, &probe_grid(cfg), &cfg.solver)?;
    write_field(&dir.join("u_plus.csv"), &report.plus.u_alpha)?;
    write_field(&dir.join("u_minus.csv"), &report.minus.u_alpha)?;
    let (mut status, mut note) = outcome_status(report.plus.outcome);
    if status == exit::OK {
        (status, note) = outcome_status(report.minus.outcome);
    }
    if !report.signs_ok {
        status = exit::NUMERICAL;
        note = Some(format!(
            "sign violation: min u+ = {:e}, max u- = {:e}",
            report.plus_min, report.minus_max
        ));
    }
    Ok(Produced {
        report: json!({ "two_solutions": report }),
        status,
        note,
    })
}

fn identity(cfg: &RunConfig, dir: &Path) -> Result<Produced, CliError> {
    use config::IdentityField;
    let op = build_operator(cfg)?;
    let y = star_center(&cfg.domain, op.grid().boundary())?;
    match cfg.run.identity_field {
        IdentityField::Paraboloid => {
            let (u, g) = match cfg.domain {
                DomainSpec::Ball { radius, dim, .. } => (
                    op.sample_checked(|x| radius * radius - x[0] * x[0])?,
                    2.0 * dim as f64,
                ),
                DomainSpec::Interval { length, .. } => {
                    (op.sample_checked(|x| x[0] * (length - x[0]))?, 2.0)
                }
                DomainSpec::Rectangle { .. } => {
                    return Err(CliError::Config(
                        "run.identity_field: paraboloid needs a ball or an interval".into(),
                    ))
                }
            };
            if cfg.m != 1 {
                return Err(CliError::Config(
                    "run.identity_field: paraboloid needs m = 1".into(),
                ));
            }
            let rhs = FnNonlinear {
                g: move |_s: f64| g,
                primitive: move |s: f64| g * s,
            };
            let report = pucci_serrin(&op, &u, &rhs, cfg.run.a, y)?;
            write_field(&dir.join("u.csv"), &u)?;
            Ok(ok(
                json!({ "field": "paraboloid", "g": g, "identity": report }),
            ))
        }
        IdentityField::Solution => {
            let problem = problem(cfg)?;
            let solved = solve_existence(&problem, &probe_grid(cfg), &cfg.solver)?;
            if solved.outcome != Outcome::Certified {
                let (_, note) = outcome_status(solved.outcome);
                return Err(CliError::Failed(format!(
                    "no certified solution for the identity: {}",
                    note.unwrap_or_else(|| "residual check failed".into())
                )));
            }
            let v = op.field(solved.v().into_values())?;
            let g = Perturbed {
                base: cfg.f.clone(),
                lambda: solved.lambda,
                p: problem.p,
            };
            let report = pucci_serrin(&op, &v, &g, cfg.run.a, y)?;
            write_field(&dir.join("v.csv"), &v)?;
            let pe = cfg.exponents()?;
            let verdict = pe.q().map(|q| theorem_a_verdict(solved.lambda, q, pe));
            Ok(ok(json!({
                "field": "solution",
                "lambda": solved.lambda,
                "alpha": solved.alpha,
                "identity": report,
                "theorem_a": verdict,
            })))
        }
    }
}

fn sweep(cfg: &RunConfig, opts: &Options, dir: &Path) -> Result<Produced, CliError> {
    cfg.require_nonexistence_p()?;
    let pe = cfg.exponents()?;
    let q = cfg.q()?.clone();
    if q.is_zero() || q <= *pe.p() {
        return Err(CliError::Config("q: must exceed p".into()));
    }
    let problem = SweepProblem {
        domain: cfg.domain.clone(),
        order: cfg.m,
        bc: cfg.bc,
        f: cfg.f.clone(),
        p: pe.p().clone(),
        q: q.clone(),
        amplitude_cap: cfg.run.amplitude_cap,
    };
    let grid = cfg.lambda_grid();
    let report = nonexistence_sweep(&problem, &grid, &probe_grid(cfg), &cfg.solver, opts.jobs)?;
    report.write_csv(BufWriter::new(fs::File::create(dir.join("threshold.csv"))?))?;
    let verdicts: Vec<Value> = grid
        .iter()
        .map(|&l| json!(theorem_a_verdict(l, &q, pe)))
        .collect();
    Ok(ok(json!({ "sweep": report, "theorem_a": verdicts })))
}
