//! End-to-end acceptance run. Prints one PASS/FAIL line per check and exits
//! non-zero when any check fails.

#[path = "../../core/tests/common/mod.rs"]
mod oracle;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use polylab_cli::{execute, exit, Command, Options};
use polylab_core::exponents::*;
use polylab_core::identity::*;
use polylab_core::nonlinearity::{
    calibrate_truncation, estimate_h0, uniform_probe_grid, BuiltinSpec, FnNonlinear, Nonlinearity,
    Perturbed, TruncatedNonlinearity,
};
use polylab_core::operators::{BoundaryCondition, DomainSpec, GridField, PolyharmonicOperator};
use polylab_core::solver::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Check {
    label: &'static str,
    pass: bool,
    detail: String,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn exponent_ledger() -> Check {
    let start = Instant::now();
    let pe = ProblemExponents::new(7, 1, rat(3, 2), None).unwrap();
    let l = bootstrap_chain(&pe).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let chain: Vec<BigRational> = l.chain.iter().map(|e| e.q.clone()).collect();
    let mut pass = chain == [rat(28, 15), rat(8, 3), rat(112, 15)]
        && l.k0 == 2
        && l.gamma_paper == Some(rat(9, 1))
        && l.nu_lower <= rat(1, 9)
        && elapsed < 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..200 {
        let m = rng.gen_range(1u32..=5);
        let n = rng.gen_range((2 * m + 1).max(3)..=25);
        let d = rng.gen_range(2i64..60);
        let k = rng.gen_range(1..d);
        let crit = critical_exponent(n, m).unwrap();
        let p = BigRational::one() + (crit - BigRational::one()) * rat(k, d);
        let pe = ProblemExponents::new(n, m, p.clone(), None).unwrap();
        let l = bootstrap_chain(&pe).unwrap();
        let terminated = l.chain.last().map(|e| e.branch) == Some(Branch::Terminal)
            && l.chain.len() <= MAX_CHAIN_STEPS;
        let two_m = rat(2 * m as i64, 1);
        let nn = rat(n as i64, 1);
        let c = &two_m * &p / (&nn * (&p - BigRational::one()));
        let inv_q1 = l.chain[0].q.recip();
        let mut ok = terminated;
        for (j, pair) in l.chain.windows(2).enumerate() {
            if pair[0].branch != Branch::Subconformal {
                break;
            }
            let closed = p.pow(j as i32 + 1) * (&inv_q1 - &c) + &c;
            ok &= closed == pair[1].q.recip();
        }
        if !ok {
            mismatches += 1;
        }
    }
    pass &= mismatches == 0;
    Check {
        label: "exponent ledger",
        pass,
        detail: format!(
            "chain {:?}, k0 {}, nu_lower {}, {elapsed:.3}s; random closed-form mismatches {mismatches}/200",
            chain.iter().map(|q| q.to_string()).collect::<Vec<_>>(),
            l.k0,
            l.nu_lower
        ),
    }
}

fn truncation_bounds() -> Check {
    const ALPHAS: [f64; 4] = [1.0, 0.5, 0.125, 1.0 / 64.0];
    const P: f64 = 3.0;
    let start = Instant::now();
    let lambda1 = PI * PI;
    let probe = uniform_probe_grid(2001);
    let specs = [
        ("power-exp", BuiltinSpec::PowerExp { q: 7.0, a: 1.0 }),
        (
            "linear-exp",
            BuiltinSpec::LinearExp {
                l: lambda1 / 2.0,
                q: 7.0,
            },
        ),
        ("pure-power", BuiltinSpec::PurePower { q: 7.0, coef: 1.0 }),
        ("linear", BuiltinSpec::Linear { c: lambda1 / 2.0 }),
        ("zero", BuiltinSpec::Zero),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut quadratic_violations = 0usize;
    let mut power_violations = 0usize;
    let mut sup_failures = Vec::new();
    let p = std::hint::black_box(P);
    for (name, spec) in specs {
        let f = Arc::new(Nonlinearity::builtin(spec).unwrap());
        let h0 = estimate_h0(&f, &probe, lambda1).unwrap();
        let params = calibrate_truncation(&f, &h0, lambda1).unwrap();
        let mut c_fit = 0.0;
        for (i, &alpha) in ALPHAS.iter().enumerate() {
            let tn = TruncatedNonlinearity::new(f.clone(), params.clone(), alpha, P).unwrap();
            let bound = params.quadratic_bound();
            let mut sups = [0.0f64; 3];
            for _ in 0..10_000 {
                let s = rng.gen_range(-10.0 / alpha..=10.0 / alpha);
                let big = tn.big_f_alpha(s);
                if big < -1e-15 * (1.0 + s * s) || big > bound * s * s * (1.0 + 1e-12) + 1e-300 {
                    quadratic_violations += 1;
                }
                if s.abs() > tn.support_edge() && tn.g_alpha(s) != s.abs().powf(p - 1.0) * s {
                    power_violations += 1;
                }
                let fa = tn.f_alpha(s);
                sups[0] = sups[0].max(fa.abs());
                sups[1] = sups[1].max((fa * s).abs());
                sups[2] = sups[2].max(big.abs());
            }
            for _ in 0..1_000 {
                let s = tn.support_edge()
                    * rng.gen_range(1.0..10.0)
                    * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                if tn.g_alpha(s) != s.abs().powf(p - 1.0) * s {
                    power_violations += 1;
                }
            }
            let worst = sups.iter().cloned().fold(0.0, f64::max);
            if i == 0 {
                c_fit = worst;
            } else {
                let allowed = c_fit * alpha.powf(-params.nu) * (1.0 + 1e-12);
                if worst > allowed {
                    sup_failures.push(format!("{name} α={alpha}: {worst:.3e} > {allowed:.3e}"));
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Check {
        label: "truncation bounds",
        pass: quadratic_violations == 0 && power_violations == 0 && sup_failures.is_empty() && elapsed < 10.0,
        detail: format!(
            "quadratic violations {quadratic_violations}, pure-power violations {power_violations}, \
             sup-form failures {} {:?}, {elapsed:.2}s",
            sup_failures.len(),
            sup_failures.first()
        ),
    }
}

type Spectrum<'a> = Box<dyn Fn(usize) -> f64 + 'a>;

fn operator_spectra() -> Check {
    use BoundaryCondition::*;
    let start = Instant::now();
    let lambda = |d: DomainSpec, m, bc| {
        PolyharmonicOperator::build(d, m, bc)
            .unwrap()
            .principal_eigenpair()
            .unwrap()
            .lambda1
    };
    let cases: [(&str, f64, f64, Spectrum<'_>); 3] = [
        (
            "interval",
            PI * PI,
            1e-3,
            Box::new(|n| lambda(DomainSpec::interval(1.0, n), 1, Dirichlet)),
        ),
        (
            "navier",
            PI.powi(4),
            0.1,
            Box::new(|n| lambda(DomainSpec::interval(1.0, n), 2, Navier)),
        ),
        (
            "ball",
            PI * PI,
            1e-2,
            Box::new(|n| lambda(DomainSpec::ball(1.0, 3, n), 1, Dirichlet)),
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, exact, tol, eig) in cases {
        let errs: Vec<f64> = [500, 1000, 2000]
            .iter()
            .map(|&n| (eig(n) - exact).abs())
            .collect();
        let order = errs
            .windows(2)
            .map(|w| (w[0] / w[1]).log2())
            .fold(f64::INFINITY, f64::min);
        pass &= errs[2] < tol && order >= 1.8;
        parts.push(format!("{name} err {:.2e} order {order:.2}", errs[2]));
    }
    let elapsed = start.elapsed().as_secs_f64();
    pass &= elapsed < 30.0;
    Check {
        label: "operator spectra",
        pass,
        detail: format!("{}; {elapsed:.2}s", parts.join(", ")),
    }
}

struct OracleRun {
    op: PolyharmonicOperator,
    u: GridField,
}

fn oracle_equivalence() -> (Check, OracleRun) {
    let start = Instant::now();
    let op = PolyharmonicOperator::build(
        DomainSpec::ball(1.0, 3, 2000),
        1,
        BoundaryCondition::Dirichlet,
    )
    .unwrap();
    let w0 = op.principal_eigenpair().unwrap().w0;
    let g = Perturbed {
        base: Arc::new(Nonlinearity::zero()),
        lambda: 1.0,
        p: 3.0,
    };
    let out = mountain_pass(&op, &g, &w0, 1.0, &SolveConfig::default()).unwrap();
    let radii: Vec<f64> = out.u.grid().coords().iter().map(|x| x[0]).collect();
    let err = sup_diff(
        out.u.values(),
        &oracle::shooting_profile(3, 3.0, 1.0, &radii),
    );
    let elapsed = start.elapsed().as_secs_f64();
    let check = Check {
        label: "mountain-pass oracle",
        pass: out.converged && err < 1e-4 && out.nehari_residual.abs() < 1e-5 && elapsed < 60.0,
        detail: format!(
            "sup error {err:.2e}, nehari {:.2e}, {} iterations, {elapsed:.2}s",
            out.nehari_residual, out.iterations
        ),
    };
    (check, OracleRun { op, u: out.u })
}

fn existence_problem() -> Problem {
    Problem {
        domain: DomainSpec::ball(1.0, 3, 400),
        order: 1,
        bc: BoundaryCondition::Dirichlet,
        f: Arc::new(Nonlinearity::builtin(BuiltinSpec::PowerExp { q: 7.0, a: 1.0 }).unwrap()),
        p: 3.0,
        alpha: scaling_alpha(4096.0, 3.0).unwrap(),
        gamma: None,
    }
}

fn existence_pipeline() -> (Check, Vec<SolveReport>) {
    let start = Instant::now();
    let problem = existence_problem();
    let probe = uniform_probe_grid(2001);
    let cfg = SolveConfig::default();
    let single = solve_existence(&problem, &probe, &cfg).unwrap();
    let two = solve_two_signed(&problem, &probe, &cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let relative = single
        .certification
        .as_ref()
        .map_or(f64::INFINITY, |c| c.relative_residual);
    let pass = single.outcome == Outcome::Certified
        && single.sup_v < 1.0
        && relative < 1e-4
        && (single.lambda - 4096.0).abs() < 1e-9
        && two.signs_ok
        && two.plus_min > 0.0
        && two.minus_max < 0.0
        && elapsed < 300.0;
    let check = Check {
        label: "existence pipeline",
        pass,
        detail: format!(
            "λ {}, sup|v| {:.4}, relative residual {:.2e}, {:?}; min u₊ {:.3e}, max u₋ {:.3e}; {elapsed:.2}s",
            single.lambda,
            single.sup_v,
            relative,
            single.outcome,
            two.plus_min,
            two.minus_max
        ),
    };
    let mut certified = vec![single];
    for r in [two.plus, two.minus] {
        if r.outcome == Outcome::Certified {
            certified.push(r);
        }
    }
    (check, certified)
}

fn manufactured(n: usize) -> IdentityReport {
    let op =
        PolyharmonicOperator::build(DomainSpec::ball(1.0, 3, n), 1, BoundaryCondition::Dirichlet)
            .unwrap();
    let u = op.sample_checked(|x| 1.0 - x[0] * x[0]).unwrap();
    let g = FnNonlinear {
        g: |_s: f64| 6.0,
        primitive: |s: f64| 6.0 * s,
    };
    pucci_serrin(&op, &u, &g, None, [0.0, 0.0]).unwrap()
}

fn identity_machinery(lane_emden: &OracleRun, certified: &[SolveReport]) -> Check {
    let fine = manufactured(2000);
    let interior_err = (fine.interior_term + 8.0 * PI).abs();
    let boundary_err = (fine.boundary_term + 8.0 * PI).abs();
    let residuals: Vec<f64> = [500, 1000, 2000]
        .iter()
        .map(|&n| manufactured(n).residual.abs())
        .collect();
    let order = residuals
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .fold(f64::INFINITY, f64::min);

    let mut normalized = Vec::new();
    let g = Perturbed {
        base: Arc::new(Nonlinearity::zero()),
        lambda: 1.0,
        p: 3.0,
    };
    let id = pucci_serrin(&lane_emden.op, &lane_emden.u, &g, None, [0.0, 0.0]).unwrap();
    normalized.push(id.foufou.unwrap() / id.foufou_scale);
    let problem = existence_problem();
    let op = PolyharmonicOperator::build(problem.domain.clone(), 1, BoundaryCondition::Dirichlet)
        .unwrap();
    for r in certified {
        let v = op.field(r.v().into_values()).unwrap();
        let g = Perturbed {
            base: problem.f.clone(),
            lambda: r.lambda,
            p: problem.p,
        };
        let id = pucci_serrin(&op, &v, &g, None, [0.0, 0.0]).unwrap();
        normalized.push(id.foufou.unwrap() / id.foufou_scale);
    }
    let foufou_ok = normalized.iter().all(|x| *x <= FOUFOU_TOL);
    Check {
        label: "identity machinery",
        pass: interior_err < 1e-3 && boundary_err < 1e-3 && order >= 1.8 && foufou_ok,
        detail: format!(
            "interior err {interior_err:.2e}, boundary err {boundary_err:.2e}, residual order {order:.2}; \
             normalized foufou [{}]",
            normalized.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn nonexistence_sweep_check() -> Check {
    let start = Instant::now();
    let problem = SweepProblem {
        domain: DomainSpec::ball(1.0, 3, 400),
        order: 1,
        bc: BoundaryCondition::Dirichlet,
        f: Arc::new(Nonlinearity::builtin(BuiltinSpec::PurePower { q: 7.0, coef: 1.0 }).unwrap()),
        p: rat(3, 1),
        q: rat(7, 1),
        amplitude_cap: 1.0,
    };
    let mut lambdas = vec![0.0];
    let (lo, hi) = (1e-2f64.ln(), 1e3f64.ln());
    lambdas.extend((0..12).map(|k| (lo + (hi - lo) * k as f64 / 11.0).exp()));
    let probe = uniform_probe_grid(2001);
    let r = nonexistence_sweep(&problem, &lambdas, &probe, &SolveConfig::default(), 0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let zero = &r.rows[0];
    let collapse = zero.verdict == RowVerdict::Collapse && zero.amplitude < COLLAPSE_AMPLITUDE;
    let s = &r.summary;
    let threshold = s.lambda_star.is_some_and(|l| l > 0.0);
    let slope_ok = s
        .fitted_slope
        .is_some_and(|k| (k - s.upper_exponent).abs() <= 0.25 * s.upper_exponent.abs());
    Check {
        label: "nonexistence sweep",
        pass: collapse && threshold && slope_ok && elapsed < 900.0,
        detail: format!(
            "λ=0 amplitude {:.1e} ({:?}); λ* {:?}; {} successes; slope {:?} vs {} (lower-bound exponent {:?}); {elapsed:.2}s",
            zero.amplitude, zero.verdict, s.lambda_star, s.successes, s.fitted_slope, s.upper_exponent, s.lower_exponent
        ),
    }
}

fn determinism(dir: &Path) -> Check {
    let configs = [
        (Command::Exponents, "exponents.toml", "N = 7\nm = 1\np = \"3/2\"\n"),
        (
            Command::Truncate,
            "spectra.toml",
            "N = 3\nm = 1\np = \"3\"\n[domain]\nshape = \"interval\"\nlength = 1.0\nintervals = 2000\n",
        ),
        (
            Command::Identity,
            "identity.toml",
            "N = 3\nm = 1\n[domain]\nshape = \"ball\"\nradius = 1.0\ndim = 3\nintervals = 2000\n\
             [run]\nidentity_field = \"paraboloid\"\n",
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (cmd, name, text) in configs {
        let path = dir.join(name);
        fs::write(&path, text).unwrap();
        let opts = Options {
            config: path,
            out: dir.join("runs"),
            seed: None,
            jobs: 0,
        };
        let reports: Vec<Option<Vec<u8>>> = (0..2)
            .map(|_| {
                let r = execute(cmd, &opts);
                (r.exit_code == exit::OK)
                    .then(|| fs::read(r.run_dir?.join("report.json")).ok())
                    .flatten()
            })
            .collect();
        let same = reports[0].is_some() && reports[0] == reports[1];
        pass &= same;
        parts.push(format!(
            "{} {}",
            cmd.name(),
            if same { "identical" } else { "differs" }
        ));
    }
    Check {
        label: "determinism",
        pass,
        detail: parts.join(", "),
    }
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let (oracle_check, lane_emden) = oracle_equivalence();
    let (existence_check, certified) = existence_pipeline();
    let checks = [
        exponent_ledger(),
        truncation_bounds(),
        operator_spectra(),
        oracle_check,
        existence_check,
        identity_machinery(&lane_emden, &certified),
        nonexistence_sweep_check(),
        determinism(tmp.path()),
    ];
    let mut failed = 0;
    for (i, c) in checks.iter().enumerate() {
        println!(
            "{} [{}] {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            i + 1,
            c.label,
            c.detail
        );
        failed += usize::from(!c.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
