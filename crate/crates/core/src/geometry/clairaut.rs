//! Geodesics of the surface of revolution `dr² + ψ(r)²dφ²` via the Clairaut integral.
//!
//! A unit-speed geodesic keeps `L = ψ(r)²φ'` constant. If it reaches its
//! smallest radius `τ` then `L = ψ(τ)`, and along it
//!
//! ```text
//! dφ/dr = ± L / (ψ √(ψ² − L²)),      ds/dr = ± ψ / √(ψ² − L²).
//! ```
//!
//! Both integrands have an inverse square-root singularity at `r = τ`, removed
//! by the substitution `r = τ + u²`. With `Δ = log ψ(r) − log ψ(τ)` they read
//! `e^{−Δ}/(ψ√(1 − e^{−2Δ}))` and `1/√(1 − e^{−2Δ})`, which never overflow.
//!
//! Between two radii `a ≤ b` the geodesic either descends to `τ < a` and climbs
//! back ("turning"), or its radius increases monotonically from `a` to `b`, in
//! which case `τ ≤ a` is the radius where the continued curve would turn. The
//! turning angle decreases from `π` to `A(a)` as `τ` goes from `0` to `a`, the
//! monotone angle increases from `0` to the same `A(a)`.

use std::f64::consts::PI;

use super::ModelManifold;
use crate::quadrature::adaptive;
use crate::{Error, Result};

/// `Δ(τ + u²) = log ψ(τ + u²) − log ψ(τ)`, with a Taylor expansion where the difference cancels.
#[inline]
fn delta(m: &ModelManifold, tau: f64, lp_tau: f64, phi_tau: f64, c_tau: f64, u: f64) -> f64 {
    let u2 = u * u;
    if phi_tau * u2 < 1e-5 {
        // log ψ expanded at τ: Φu² + ½Φ'u⁴ with Φ' = c − Φ²
        phi_tau * u2 + 0.5 * (c_tau - phi_tau * phi_tau) * u2 * u2
    } else {
        m.warp().lp(tau + u2) - lp_tau
    }
}

/// Integrands with respect to `u`, including the Jacobian `2u` of `r = τ + u²`.
#[inline]
fn integrands(m: &ModelManifold, tau: f64, lp_tau: f64, phi_tau: f64, c_tau: f64, u: f64) -> (f64, f64) {
    let d = delta(m, tau, lp_tau, phi_tau, c_tau, u);
    let root = (-(-2.0 * d).exp_m1()).sqrt();
    let lp = lp_tau + d;
    let length = 2.0 * u / root;
    let angle = 2.0 * u * (-d - lp).exp() / root;
    (angle, length)
}

/// Local data at the turning radius.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Turning {
    pub tau: f64,
    pub lp: f64,
    pub phi: f64,
    pub c: f64,
}

impl Turning {
    pub fn new(m: &ModelManifold, tau: f64) -> Self {
        let (h, hp) = m.warp().h_and_slope(tau);
        Turning { tau, lp: h + tau.ln(), phi: hp + 1.0 / tau, c: m.warp().profile().at(tau) }
    }

    /// Clairaut constant `L = ψ(τ)`.
    pub fn clairaut(&self) -> f64 {
        self.lp.exp()
    }
}

/// Length of the geodesic with turning radius `t.tau ≤ a` between radii `a` and `b`.
fn sweep_length(m: &ModelManifold, t: &Turning, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let ua = (a - t.tau).max(0.0).sqrt();
    let ub = (b - t.tau).max(0.0).sqrt();
    adaptive(|u| integrands(m, t.tau, t.lp, t.phi, t.c, u).1, ua, ub, 1e-300, 1e-13).value
}

/// Angle only, for root finding.
fn sweep_angle(m: &ModelManifold, t: &Turning, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let ua = (a - t.tau).max(0.0).sqrt();
    let ub = (b - t.tau).max(0.0).sqrt();
    adaptive(|u| integrands(m, t.tau, t.lp, t.phi, t.c, u).0, ua, ub, 1e-300, 1e-13).value
}

/// Exact geodesic distance by shooting on the turning radius.
pub(crate) fn geodesic_distance(m: &ModelManifold, r1: f64, r2: f64, alpha: f64) -> Result<f64> {
    let (a, b) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if a == 0.0 {
        return Ok(b);
    }
    if alpha <= 0.0 {
        return Ok(b - a);
    }
    if alpha >= PI {
        return Ok(a + b);
    }
    let mid = sweep_angle(m, &Turning::new(m, a), a, b);
    let turning = alpha >= mid;
    // angle as a function of τ ∈ (0, a]: decreasing on the turning branch, increasing on the monotone one
    let angle_at = |tau: f64| {
        let t = Turning::new(m, tau);
        if turning {
            sweep_angle(m, &t, tau, a) + sweep_angle(m, &t, tau, b)
        } else {
            sweep_angle(m, &t, a, b)
        }
    };
    let (mut lo, mut hi) = (0.0, a);
    for _ in 0..200 {
        let tau = 0.5 * (lo + hi);
        if tau <= lo || tau >= hi {
            break;
        }
        let too_wide = angle_at(tau) > alpha;
        // turning: larger τ ⇒ smaller angle; monotone: larger τ ⇒ larger angle
        if too_wide == turning {
            lo = tau;
        } else {
            hi = tau;
        }
        if hi - lo <= 1e-16 * a {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let t = Turning::new(m, tau);
    let d = if turning {
        sweep_length(m, &t, tau, a) + sweep_length(m, &t, tau, b)
    } else {
        sweep_length(m, &t, a, b)
    };
    if !d.is_finite() {
        return Err(Error::Numerical(format!("geodesic length not finite for ({r1}, {r2}, {alpha})")));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::CurvatureProfile;
    use crate::geometry::{chord, hyperbolic_distance, DistanceMethod};
    use crate::warp::WarpSolution;

    fn model(c: f64, r_max: f64) -> ModelManifold {
        let w = WarpSolution::solve_shared(&CurvatureProfile::constant(c).unwrap(), r_max).unwrap();
        ModelManifold::new(2, w).unwrap()
    }

    #[test]
    fn hyperbolic_examples() {
        let m = model(1.0, 6.0);
        let d = m.distance(1.0, 1.0, PI / 2.0, DistanceMethod::BvpRefined).unwrap();
        assert!((d - 1.513_374_006_596_504).abs() < 1e-9, "{d}");
        for &(r1, r2, al) in &[(0.3, 4.0, 2.5), (2.0, 2.0, 0.01), (5.0, 1.0, 3.1), (1e-3, 2.0, 1.0), (3.0, 3.5, 0.4)] {
            let d = m.distance(r1, r2, al, DistanceMethod::BvpRefined).unwrap();
            let e = hyperbolic_distance(1.0, r1, r2, al);
            assert!((d / e - 1.0).abs() < 1e-9, "{r1} {r2} {al}: {d} vs {e}");
        }
    }

    #[test]
    fn flat_limit_is_chord() {
        let m = model(1e-12, 5.0);
        for &(r1, r2, al) in &[(1.0, 1.0, PI / 2.0), (0.5, 3.0, 2.0), (2.0, 2.5, 0.1)] {
            let d = m.distance(r1, r2, al, DistanceMethod::BvpRefined).unwrap();
            assert!((d / chord(r1, r2, al) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn trivial_cases() {
        let m = model(1.0, 5.0);
        assert_eq!(m.distance(1.0, 3.0, 0.0, DistanceMethod::BvpRefined).unwrap(), 2.0);
        assert_eq!(m.distance(1.0, 3.0, PI, DistanceMethod::BvpRefined).unwrap(), 4.0);
        assert_eq!(m.distance(0.0, 3.0, 1.0, DistanceMethod::BvpRefined).unwrap(), 3.0);
        assert!(m.distance(1.0, 6.0, 1.0, DistanceMethod::BvpRefined).is_err());
        assert!(m.distance(1.0, 2.0, 4.0, DistanceMethod::BvpRefined).is_err());
    }
}
