use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use polylab_core::exponents::*;
use proptest::prelude::*;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `(N, m, p)` with `N ≤ 25`, `m ≤ 5`, `N ≥ 2m + 1` and `p` strictly inside
/// `(1, critical)`.
fn subcritical() -> impl Strategy<Value = ProblemExponents> {
    (1u32..=5)
        .prop_flat_map(|m| (Just(m), (2 * m + 1).max(3)..=25))
        .prop_flat_map(|(m, n)| (Just(m), Just(n), 2i64..60))
        .prop_flat_map(|(m, n, d)| (Just(m), Just(n), Just(d), 1..d))
        .prop_map(|(m, n, d, k)| {
            let crit = critical_exponent(n, m).unwrap();
            let p = BigRational::one() + (crit - BigRational::one()) * rat(k, d);
            ProblemExponents::new(n, m, p, None).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chain_terminates_and_matches_closed_form(pe in subcritical()) {
        let l = bootstrap_chain(&pe).unwrap();
        prop_assert!(l.chain.windows(2).all(|w| w[0].q < w[1].q));
        let last = l.chain.last().unwrap();
        prop_assert_eq!(last.branch, Branch::Terminal);
        let two_m = BigRational::from_integer(BigInt::from(2 * pe.order()));
        let n = BigRational::from_integer(BigInt::from(pe.dim()));
        for e in &l.chain[..l.chain.len() - 1] {
            prop_assert!(&two_m * &e.q <= n);
        }
        // Independent replay of the affine recursion 1/q_{k+1} = p/q_k − 2mp/N.
        let p = pe.p().clone();
        let c = &two_m * &p / (&n * (&p - BigRational::one()));
        let inv_q1 = l.chain[0].q.recip();
        for (k, pair) in l.chain.windows(2).enumerate() {
            if pair[0].branch != Branch::Subconformal {
                break;
            }
            let replay = &p / &pair[0].q - &two_m * &p / &n;
            prop_assert_eq!(replay.clone(), pair[1].q.recip());
            let closed = p.pow(k as i32 + 1) * (&inv_q1 - &c) + &c;
            prop_assert_eq!(closed, replay);
        }
    }

    #[test]
    fn first_exponent_lies_below_fixed_point(pe in subcritical()) {
        let q1 = first_exponent(&pe);
        let two_m = BigRational::from_integer(BigInt::from(2 * pe.order()));
        let n = BigRational::from_integer(BigInt::from(pe.dim()));
        let p = pe.p().clone();
        let c = &two_m * &p / (&n * (&p - BigRational::one()));
        prop_assert!((q1.recip() - c).is_negative());
    }

    #[test]
    fn first_step_exceeds_p(pe in subcritical()) {
        let q1 = first_exponent(&pe);
        if let StepResult::Next { q_star, branch: Branch::Subconformal } = sobolev_step(&q1, &pe).unwrap() {
            prop_assert!(&q_star > pe.p());
        }
    }

    #[test]
    fn nu_is_reciprocal_of_largest_gamma(pe in subcritical()) {
        let l = bootstrap_chain(&pe).unwrap();
        let worst = match &l.gamma_paper {
            Some(g) if *g > l.gamma_iterated => g.clone(),
            _ => l.gamma_iterated.clone(),
        };
        prop_assert_eq!(l.nu_lower.recip(), worst);
    }

    #[test]
    fn critical_decreases_in_dimension(m in 1u32..=5, extra in 1u32..20) {
        let n = 2 * m + extra;
        prop_assert!(critical_exponent(n + 1, m).unwrap() < critical_exponent(n, m).unwrap());
    }

    #[test]
    fn delta_increases_in_q(pn in 3i64..40, gap1 in 1i64..40, gap2 in 1i64..40) {
        let p = rat(pn, 2);
        let q1 = &p + rat(gap1, 3);
        let q2 = &q1 + rat(gap2, 3);
        match (nonexistence_delta(&p, &q1).unwrap(), nonexistence_delta(&p, &q2).unwrap()) {
            (Delta::Power(a), Delta::Power(b)) => prop_assert!(a < b),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn scaling_round_trip(lambda in 1f64..1e6, p in 1.01f64..20.0) {
        let back = scaling_lambda(scaling_alpha(lambda, p).unwrap(), p).unwrap();
        prop_assert!((back - lambda).abs() <= 1e-14 * lambda);
    }
}

#[test]
fn ledger_runs_fast() {
    let start = std::time::Instant::now();
    let pe = ProblemExponents::new(7, 1, rat(3, 2), None).unwrap();
    let l = bootstrap_chain(&pe).unwrap();
    assert_eq!(
        l.chain.iter().map(|e| e.q.clone()).collect::<Vec<_>>(),
        vec![rat(28, 15), rat(8, 3), rat(112, 15)]
    );
    assert!(start.elapsed().as_secs_f64() < 1.0);
}
