use hmono_core::geometry::{spherical_dir, SphericalAngle};
use hmono_core::monotone::{check_cyclic, check_h_pair, close_chain, ChainMode, ClosedHChain};
use hmono_core::resolvent::{minty_solve, MintyOptions};
use hmono_core::{HVec, OperatorSpec, Point, ValueSet};
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn coord() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

fn point(n: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(coord(), 2 * n + 1).prop_map(|c| Point::from_slice(&c).unwrap())
}

fn hvec(n: usize) -> impl Strategy<Value = HVec> {
    prop::collection::vec(coord(), 2 * n).prop_map(|c| HVec::from_vec(c).unwrap())
}

fn value_set() -> impl Strategy<Value = ValueSet> {
    prop_oneof![
        hvec(1).prop_map(ValueSet::singleton),
        (hvec(1), 0.0..3.0f64).prop_map(|(c, r)| ValueSet::ball(c, r).unwrap()),
        prop::collection::vec(hvec(1), 1..6).prop_map(|v| ValueSet::polytope(v).unwrap()),
    ]
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn group_axioms(a in point(2), b in point(2), c in point(2)) {
        let e = Point::identity(2);
        prop_assert_eq!(a.mul(&e).unwrap(), a.clone());
        prop_assert_eq!(e.mul(&a).unwrap(), a.clone());
        let ai = a.inv();
        prop_assert!(a.mul(&ai).unwrap().to_vec().iter().all(|v| v.abs() <= 1e-12));
        let lhs = a.mul(&b).unwrap().mul(&c).unwrap().to_vec();
        let rhs = a.mul(&b.mul(&c).unwrap()).unwrap().to_vec();
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn distance_is_symmetric_and_left_invariant(a in point(1), b in point(1), g in point(1)) {
        let d = a.dist(&b).unwrap();
        prop_assert!((d - b.dist(&a).unwrap()).abs() <= 1e-12 * d.max(1.0));
        let dg = g.mul(&a).unwrap().dist(&g.mul(&b).unwrap()).unwrap();
        prop_assert!((d - dg).abs() <= 1e-11 * d.max(1.0));
    }

    #[test]
    fn support_is_sublinear(s in value_set(), d1 in hvec(1), d2 in hvec(1), c in 0.0..5.0f64) {
        let sum = s.support(&d1.add(&d2));
        prop_assert!(sum <= s.support(&d1) + s.support(&d2) + 1e-9 * (1.0 + sum.abs()));
        let scaled = s.support(&d1.scale(c));
        prop_assert!((scaled - c * s.support(&d1)).abs() <= 1e-9 * (1.0 + scaled.abs()));
    }

    #[test]
    fn pair_slack_is_symmetric(a in point(1), w in hvec(1)) {
        let b = a.exp_h(&w).unwrap();
        for op in [OperatorSpec::example1(), OperatorSpec::example1_negated(), OperatorSpec::GaugeSubdiff] {
            let ab = check_h_pair(&op, &a, &b, 1e-8).unwrap().worst_slack;
            let ba = check_h_pair(&op, &b, &a, 1e-8).unwrap().worst_slack;
            prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab.abs()));
        }
    }

    #[test]
    fn linear_slack_scales_with_positive_factor(a in point(1), w in hvec(1), c in 0.01..10.0f64) {
        let b = a.exp_h(&w).unwrap();
        let rows = |k: f64| vec![vec![3.0 * k, 0.0], vec![-2.0 * k, 4.0 * k]];
        let s1 = check_h_pair(&OperatorSpec::linear(1, &rows(1.0)).unwrap(), &a, &b, 1e-8).unwrap().worst_slack;
        let sc = check_h_pair(&OperatorSpec::linear(1, &rows(c)).unwrap(), &a, &b, 1e-8).unwrap().worst_slack;
        prop_assert!((sc - c * s1).abs() <= 1e-9 * (1.0 + sc.abs()));
    }

    #[test]
    fn two_point_chain_matches_pair_check(a in point(1), w in hvec(1)) {
        let b = a.exp_h(&w).unwrap();
        let chain = ClosedHChain::new(vec![a.clone(), b.clone()], 1e-8).unwrap();
        for op in [OperatorSpec::example1(), OperatorSpec::GaugeSubdiff] {
            let cyc = check_cyclic(&op, &chain, 1e-8).unwrap().worst_slack;
            let pair = check_h_pair(&op, &a, &b, 1e-8).unwrap().worst_slack;
            prop_assert!((cyc - pair).abs() <= 1e-9 * (1.0 + pair.abs()));
        }
    }

    #[test]
    fn validate_accepts_adjusted_chains(
        xy in prop::collection::vec(hvec(2), 3..7),
        t0 in coord(),
    ) {
        if let Ok(chain) = close_chain(&xy, t0, ChainMode::Adjust, 1e-9) {
            prop_assert!(chain.closure().abs() <= 1e-10);
            let projected: Vec<HVec> = chain.points().iter().map(|p| p.xi1().clone()).collect();
            let again = close_chain(&projected, t0, ChainMode::Validate, 1e-9).unwrap();
            prop_assert!(close(
                &again.points().iter().flat_map(|p| p.to_vec()).collect::<Vec<_>>(),
                &chain.points().iter().flat_map(|p| p.to_vec()).collect::<Vec<_>>(),
                1e-9,
            ));
        }
    }

    #[test]
    fn spherical_dir_has_unit_norm(
        head in prop::collection::vec(0.0..PI, 2),
        last in 0.0..TAU,
    ) {
        let mut phi = head;
        phi.push(last);
        let w = spherical_dir(&SphericalAngle::new(phi).unwrap());
        prop_assert!((w.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn solver_residuals_decrease(base in point(1), p in hvec(1), lam in 0.1..10.0f64) {
        let sol = minty_solve(&OperatorSpec::example1(), &base, lam, &p, &MintyOptions::default()).unwrap();
        prop_assert!(sol.history.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(sol.residual <= 1e-9);
        prop_assert!(base.in_hplane(&sol.zeta, 1e-9).unwrap());
    }
}
