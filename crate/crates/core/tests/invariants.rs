//! Property tests of structural invariants against closed-form oracles.

use std::f64::consts::PI;

use hadamard::analysis::{check_existence, check_nonexistence, default_a, default_probe, DEFAULT_DELTA};
use hadamard::energy::entropy;
use hadamard::geometry::{chord, hyperbolic_distance};
use hadamard::warp::DEFAULT_TOL;
use hadamard::{CurvatureProfile, DistanceMethod, InteractionPotential, ModelManifold, RadialDensity, Verdict, WarpSolution};
use proptest::prelude::*;

fn model(c: CurvatureProfile, n: usize, r_max: f64) -> ModelManifold {
    ModelManifold::new(n, WarpSolution::solve_shared(&c, r_max).unwrap()).unwrap()
}

fn profile() -> impl Strategy<Value = CurvatureProfile> {
    prop_oneof![
        (0.05..5.0f64).prop_map(|c| CurvatureProfile::constant(c).unwrap()),
        (1.0..4.0f64, 0.1..2.0f64).prop_map(|(k, s)| CurvatureProfile::power(k, s).unwrap()),
        (1.0..4.0f64, 0.1..2.0f64, 0.0..2.0f64).prop_map(|(k, s, o)| CurvatureProfile::power_with_offset(k, s, o).unwrap()),
        (0.1..1.0f64, 0.1..2.0f64).prop_map(|(b, s)| CurvatureProfile::exponential(b, s).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn warp_invariants_hold(c in profile()) {
        let w = WarpSolution::solve(&c, 8.0, DEFAULT_TOL).unwrap();
        let inv = w.invariants();
        prop_assert!(inv.all(), "{inv:?}");
    }

    #[test]
    fn constant_warp_is_sinh(c in 0.05..9.0f64, t in 1e-3..30.0f64) {
        let w = WarpSolution::solve(&CurvatureProfile::constant(c).unwrap(), 30.0, DEFAULT_TOL).unwrap();
        let k = c.sqrt();
        let exact = (k * t).sinh().ln() - k.ln();
        prop_assert!((w.log_psi(t).unwrap() - exact).abs() < 1e-8 * exact.abs().max(1.0));
    }

    #[test]
    fn balls_are_larger_than_flat_balls(c in profile(), r in 0.1..5.0f64, n in 2usize..5) {
        // ψ(θ) ≥ θ on a Cartan–Hadamard model, so volumes dominate the Euclidean ones
        let m = model(c, n, 5.0);
        let v = m.ball_volume(r).unwrap().log_volume;
        let half_n = n as f64 / 2.0;
        let flat = half_n * PI.ln() - statrs::function::gamma::ln_gamma(half_n + 1.0) + n as f64 * r.ln();
        prop_assert!(v >= flat - 1e-9, "{v} < {flat}");
        prop_assert!(m.ball_volume(0.9 * r).unwrap().log_volume < v);
    }

    #[test]
    fn distances_respect_metric_bounds(c in profile(), r1 in 0.0..4.0f64, r2 in 0.0..4.0f64, a in 0.0..PI) {
        let m = model(c, 2, 4.0);
        let d = m.distance(r1, r2, a, DistanceMethod::BvpRefined).unwrap();
        let swapped = m.distance(r2, r1, a, DistanceMethod::BvpRefined).unwrap();
        let tol = 1e-9 * d.max(1.0);
        prop_assert!((d - swapped).abs() <= tol);
        prop_assert!(d >= (r1 - r2).abs() - tol && d <= r1 + r2 + tol);
        prop_assert!(d >= chord(r1, r2, a) - tol);
        let (lo, hi) = m.distance_bracket(r1, r2, a);
        prop_assert!(d >= lo - tol && d <= hi + tol, "{d} outside [{lo}, {hi}]");
    }

    #[test]
    fn hyperbolic_distance_matches_law_of_cosines(c in 0.1..4.0f64, r1 in 0.0..3.0f64, r2 in 0.0..3.0f64, a in 0.0..PI) {
        let m = model(CurvatureProfile::constant(c).unwrap(), 2, 3.0);
        let d = m.distance(r1, r2, a, DistanceMethod::BvpRefined).unwrap();
        let exact = hyperbolic_distance(c, r1, r2, a);
        prop_assert!((d - exact).abs() <= 1e-6 * exact.max(1e-3));
    }

    #[test]
    fn densities_carry_unit_mass(c in profile(), r in 0.2..4.0f64, s in 0.2..1.0f64, nodes in 9usize..80) {
        let m = model(c, 2, 4.0);
        let ball = RadialDensity::uniform_ball_with(&m, r, nodes).unwrap();
        prop_assert!((ball.mass() - 1.0).abs() < 1e-12);
        // the uniform ball's entropy is −log|B_R| exactly
        prop_assert!((entropy(&ball) + m.ball_volume(r).unwrap().log_volume).abs() < 1e-9);
        let exp = RadialDensity::exp_profile_on(&m, s, 4.0, nodes).unwrap();
        prop_assert!((exp.mass() - 1.0).abs() < 1e-12);
        let (fine, drift) = exp.refine(2).unwrap();
        prop_assert!((fine.mass() - 1.0).abs() < 1e-12 && drift.abs() < 1e-12);
        prop_assert!((exp.coarsen().unwrap().mass() - 1.0).abs() < 1e-12);
        let cum = exp.cumulative_mass();
        prop_assert!(cum.windows(2).all(|w| w[1] >= w[0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    /// The existence and nonexistence tests are never both satisfied.
    #[test]
    fn criteria_verdicts_are_coherent(k in 1.0..4.0f64, ratio in 0.3..3.0f64, n in 2usize..4) {
        let c = CurvatureProfile::power(k, 1.0).unwrap();
        let h = InteractionPotential::power(1.0, ratio * (k / 2.0 + 1.0)).unwrap();
        let probe = default_probe();
        let non = check_nonexistence(&h, &c, n, default_a(n), DEFAULT_DELTA, &probe).unwrap();
        let ex = check_existence(&h, &c, n, &probe);
        if let Ok(ex) = ex {
            prop_assert!(!(non.verdict == Verdict::Satisfied && ex.verdict == Verdict::Satisfied));
        }
        // well inside either regime the verdict is decisive
        if ratio < 0.6 {
            prop_assert_eq!(non.verdict, Verdict::Satisfied);
        }
    }
}
