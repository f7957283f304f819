use std::f64::consts::PI;
use std::sync::OnceLock;

use polylab_core::operators::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn operators() -> &'static [PolyharmonicOperator] {
    static OPS: OnceLock<Vec<PolyharmonicOperator>> = OnceLock::new();
    OPS.get_or_init(|| {
        use BoundaryCondition::*;
        let build = |d: DomainSpec, m, bc| PolyharmonicOperator::build(d, m, bc).unwrap();
        vec![
            build(DomainSpec::interval(1.0, 64), 1, Dirichlet),
            build(DomainSpec::interval(1.0, 64), 2, Dirichlet),
            build(DomainSpec::interval(1.0, 64), 2, Navier),
            build(DomainSpec::interval(1.0, 48), 3, Navier),
            build(DomainSpec::ball(1.0, 3, 64), 1, Dirichlet),
            build(DomainSpec::ball(1.0, 5, 64), 2, Dirichlet),
            build(DomainSpec::ball(1.0, 3, 64), 2, Navier),
            build(DomainSpec::rectangle(1.0, 2.0, 16, 24), 1, Dirichlet),
            build(DomainSpec::rectangle(1.0, 2.0, 16, 24), 2, Dirichlet),
            build(DomainSpec::rectangle(1.0, 2.0, 16, 24), 2, Navier),
        ]
    })
}

fn random_field(op: &PolyharmonicOperator, seed: u64, nonnegative: bool) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.grid().len();
    let vals = (0..n)
        .map(|_| {
            if nonnegative {
                rng.gen_range(0.0..1.0)
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
        .collect();
    op.field(vals).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn apply_is_symmetric(k in 0..10usize, s1 in any::<u64>(), s2 in any::<u64>()) {
        let op = &operators()[k];
        let u = random_field(op, s1, false);
        let v = random_field(op, s2, false);
        let auv = op.apply(&u).unwrap().dot(&v).unwrap();
        let uav = u.dot(&op.apply(&v).unwrap()).unwrap();
        let scale = (op.form(&u).unwrap() * op.form(&v).unwrap()).sqrt();
        prop_assert!((auv - uav).abs() <= 1e-10 * scale, "{auv} vs {uav}");
    }

    #[test]
    fn form_is_positive(k in 0..10usize, seed in any::<u64>()) {
        let op = &operators()[k];
        let u = random_field(op, seed, false);
        prop_assert!(op.form(&u).unwrap() > 0.0);
    }

    #[test]
    fn solve_inverts_apply(k in 0..10usize, seed in any::<u64>()) {
        let op = &operators()[k];
        let u = random_field(op, seed, false);
        let back = op.solve(&op.apply(&u).unwrap()).unwrap();
        let err = back.values().iter().zip(u.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8 * u.sup_norm(), "{k}: {err:e}");
    }

    #[test]
    fn navier_solve_preserves_positivity(k in prop::sample::select(vec![0usize, 2, 3, 4, 6, 7, 9]), seed in any::<u64>()) {
        let op = &operators()[k];
        let rhs = random_field(op, seed, true);
        let u = op.solve(&rhs).unwrap();
        prop_assert!(u.values().iter().all(|&x| x > 0.0));
    }
}

fn eigen_order(exact: f64, build: impl Fn(usize) -> PolyharmonicOperator) -> f64 {
    let errs: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| (build(n).principal_eigenpair().unwrap().lambda1 - exact).abs())
        .collect();
    let o1 = (errs[0] / errs[1]).log2();
    let o2 = (errs[1] / errs[2]).log2();
    o1.min(o2)
}

type Builder = Box<dyn Fn(usize) -> PolyharmonicOperator>;

#[test]
fn eigenvalues_converge_at_second_order() {
    use BoundaryCondition::*;
    let clamped = 4.730_040_744_862_704_f64.powi(4);
    let cases: Vec<(&str, f64, Builder)> = vec![
        (
            "interval",
            PI * PI,
            Box::new(|n| {
                PolyharmonicOperator::build(DomainSpec::interval(1.0, n), 1, Dirichlet).unwrap()
            }),
        ),
        (
            "ball",
            PI * PI,
            Box::new(|n| {
                PolyharmonicOperator::build(DomainSpec::ball(1.0, 3, n), 1, Dirichlet).unwrap()
            }),
        ),
        (
            "navier",
            PI.powi(4),
            Box::new(|n| {
                PolyharmonicOperator::build(DomainSpec::interval(1.0, n), 2, Navier).unwrap()
            }),
        ),
        (
            "clamped",
            clamped,
            Box::new(|n| {
                PolyharmonicOperator::build(DomainSpec::interval(1.0, n), 2, Dirichlet).unwrap()
            }),
        ),
    ];
    for (name, exact, build) in cases {
        let order = eigen_order(exact, build);
        assert!(order >= 1.8, "{name}: observed order {order}");
    }
}

#[test]
fn rectangle_eigenvalue() {
    let op = PolyharmonicOperator::build(
        DomainSpec::rectangle(1.0, 2.0, 64, 128),
        1,
        BoundaryCondition::Dirichlet,
    )
    .unwrap();
    let exact = PI * PI * (1.0 + 0.25);
    let l = op.principal_eigenpair().unwrap().lambda1;
    assert!((l - exact).abs() < 5e-3 * exact, "{l}");
}

#[test]
fn ball_integral_of_paraboloid() {
    let op = PolyharmonicOperator::build(
        DomainSpec::ball(1.0, 3, 400),
        1,
        BoundaryCondition::Dirichlet,
    )
    .unwrap();
    let u = op.sample_checked(|x| 1.0 - x[0] * x[0]).unwrap();
    assert!((u.integrate() - 8.0 * PI / 15.0).abs() < 1e-4);
    let z = GridField::zeros(op.grid().clone());
    assert_eq!(z.sup_norm(), 0.0);
    let t = op.boundary_trace(&z).unwrap();
    assert!(t.values.iter().all(|v| *v == 0.0));
}

#[test]
fn fields_on_different_grids_are_rejected() {
    let a = PolyharmonicOperator::build(
        DomainSpec::interval(1.0, 32),
        1,
        BoundaryCondition::Dirichlet,
    )
    .unwrap();
    let b = PolyharmonicOperator::build(
        DomainSpec::interval(1.0, 48),
        1,
        BoundaryCondition::Dirichlet,
    )
    .unwrap();
    let u = GridField::zeros(a.grid().clone());
    let v = GridField::zeros(b.grid().clone());
    assert!(u.dot(&v).is_err());
    assert!(b.apply(&u).is_err());
}
