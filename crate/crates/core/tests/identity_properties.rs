use std::f64::consts::PI;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use polylab_core::exponents::{parse_rational, ProblemExponents};
use polylab_core::identity::*;
use polylab_core::nonlinearity::{
    uniform_probe_grid, BuiltinSpec, FnNonlinear, Nonlinearity, Perturbed,
};
use polylab_core::operators::{BoundaryCondition, DomainSpec, PolyharmonicOperator};
use polylab_core::solver::{mountain_pass, solve_existence, Outcome, Problem, SolveConfig};
use proptest::prelude::*;

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

#[test]
fn manufactured_residual_converges_quadratically() {
    let r: Vec<f64> = [250, 500, 1000]
        .iter()
        .map(|&n| manufactured(n).residual.abs())
        .collect();
    for w in r.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{r:?}");
    }
    let fine = manufactured(2000);
    assert!((fine.interior_term + 8.0 * PI).abs() < 1e-3);
    assert!((fine.boundary_term + 8.0 * PI).abs() < 1e-3);
}

#[test]
fn multiplier_zeroes_form_coefficient() {
    for (dim, order) in [(3, 1), (5, 2), (7, 1), (9, 2)] {
        let a = default_multiplier(dim, order);
        assert_eq!(dim as f64 / 2.0 - a - order as f64, 0.0);
    }
}

#[test]
fn lane_emden_identity_and_foufou() {
    let mut residuals = Vec::new();
    for n in [250, 500] {
        let op = PolyharmonicOperator::build(
            DomainSpec::ball(1.0, 3, n),
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
        let r = pucci_serrin(&op, &out.u, &g, None, [0.0, 0.0]).unwrap();
        let quartic = out.u.integrate_map(|s| s.powi(4));
        let expect = (1.0 - 6.0 / 4.0) * quartic;
        assert!((r.foufou.unwrap() - expect).abs() < 1e-12 * quartic);
        assert_eq!(r.sign_verdict, SignVerdict::IdentityConsistent);
        residuals.push(r.residual.abs());
    }
    assert!(residuals[1] < residuals[0], "{residuals:?}");
}

#[test]
fn certified_solutions_have_nonpositive_foufou() {
    let probe = uniform_probe_grid(2001);
    let f = Arc::new(Nonlinearity::builtin(BuiltinSpec::PowerExp { q: 7.0, a: 1.0 }).unwrap());
    for alpha in [1.0 / 32.0, 1.0 / 64.0] {
        let problem = Problem {
            domain: DomainSpec::ball(1.0, 3, 300),
            order: 1,
            bc: BoundaryCondition::Dirichlet,
            f: f.clone(),
            p: 3.0,
            alpha,
            gamma: None,
        };
        let r = solve_existence(&problem, &probe, &SolveConfig::default()).unwrap();
        assert_eq!(r.outcome, Outcome::Certified);
        let v = r.v();
        let op =
            PolyharmonicOperator::build(problem.domain.clone(), 1, BoundaryCondition::Dirichlet)
                .unwrap();
        let v = op.field(v.into_values()).unwrap();
        let g = Perturbed {
            base: f.clone(),
            lambda: r.lambda,
            p: 3.0,
        };
        let id = pucci_serrin(&op, &v, &g, None, [0.0, 0.0]).unwrap();
        assert!(id.foufou.unwrap() <= FOUFOU_TOL * id.foufou_scale);
    }
}

#[test]
fn sweep_collapses_at_zero_and_finds_small_solutions() {
    let problem = SweepProblem {
        domain: DomainSpec::ball(1.0, 3, 200),
        order: 1,
        bc: BoundaryCondition::Dirichlet,
        f: Arc::new(Nonlinearity::builtin(BuiltinSpec::PurePower { q: 7.0, coef: 1.0 }).unwrap()),
        p: parse_rational("3").unwrap(),
        q: parse_rational("7").unwrap(),
        amplitude_cap: 1.0,
    };
    let probe = uniform_probe_grid(2001);
    let lambdas = [0.0, 1.0, 300.0, 1000.0];
    let r = nonexistence_sweep(&problem, &lambdas, &probe, &SolveConfig::default(), 2).unwrap();
    assert_eq!(r.rows[0].verdict, RowVerdict::Collapse);
    assert_eq!(r.rows[0].amplitude, 0.0);
    assert_eq!(r.rows[3].verdict, RowVerdict::Success);
    assert_eq!(r.summary.lambda_star, Some(300.0));
    let again = nonexistence_sweep(&problem, &lambdas, &probe, &SolveConfig::default(), 1).unwrap();
    assert_eq!(r, again);
    let mut csv = Vec::new();
    r.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("lambda,amplitude,residual,foufou,verdict"));
    assert_eq!(text.lines().count(), 5);
}

fn rational(k: i64) -> BigRational {
    BigRational::new(BigInt::from(k), BigInt::from(4))
}

proptest! {
    #[test]
    fn theorem_a_verdict_is_monotone(q4 in 4i64..60, dq in 0i64..20, l in -10.0f64..1.0, dl in 0.0f64..5.0) {
        let pe = ProblemExponents::new(3, 1, parse_rational("3").unwrap(), None).unwrap();
        let (q, q_big) = (rational(q4), rational(q4 + dq));
        let l = if l > 0.5 { 0.0 } else { l };
        if theorem_a_verdict(l, &q, &pe) == TheoremAVerdict::NoNontrivialSolution {
            prop_assert_eq!(theorem_a_verdict(l, &q_big, &pe), TheoremAVerdict::NoNontrivialSolution);
            prop_assert_eq!(theorem_a_verdict(l - dl, &q, &pe), TheoremAVerdict::NoNontrivialSolution);
        }
    }
}
