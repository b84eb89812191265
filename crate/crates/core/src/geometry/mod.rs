//! The rotationally symmetric model manifold `dr² + ψ(r)²·g_{S^{n−1}}`.
//!
//! Everything is derived from the warp: volume elements, ball volumes, the
//! Jacobian of the exponential map at the pole, and geodesic distances. Radial
//! symmetry confines the geodesic between two points to the two-dimensional
//! surface of revolution `dr² + ψ(r)²dφ²` through them and the pole.

mod bounds;
mod clairaut;
mod fastmarch;
mod pairs;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::quadrature::adaptive;
use crate::warp::WarpSolution;
use crate::{Error, Result};

pub use bounds::{chord, cosine_lower_bound, hyperbolic_distance};
pub use fastmarch::{DistanceField, GridSpec};
pub use pairs::PairTable;

/// How a geodesic distance is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    /// Eikonal solve on a uniform `(r, φ)` grid.
    FastMarch,
    /// Geodesic shooting with the Clairaut integral, solved to near machine precision.
    #[default]
    BvpRefined,
}

/// Volume of a geodesic ball, with its logarithm for radii where it overflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallVolume {
    pub log_volume: f64,
    /// `+∞` when `overflow` is set.
    pub volume: f64,
    pub overflow: bool,
}

/// Dimension plus warp.
#[derive(Debug, Clone)]
pub struct ModelManifold {
    n: usize,
    warp: Arc<WarpSolution>,
    log_omega: f64,
}

/// `log ω_n`, the log-volume of the flat unit ball, by the recursion `ω_n = 2π/n·ω_{n−2}`.
pub fn log_unit_ball_volume(n: usize) -> f64 {
    let mut acc = if n.is_multiple_of(2) { 0.0 } else { 2f64.ln() };
    let mut k = if n.is_multiple_of(2) { 2 } else { 3 };
    while k <= n {
        acc += (2.0 * std::f64::consts::PI / k as f64).ln();
        k += 2;
    }
    acc
}

/// `log(e^a + e^b)`.
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

impl ModelManifold {
    /// Builds the model and checks that it is Cartan–Hadamard: `c ≥ 0` and `ψ' ≥ 1` at every warp node.
    pub fn new(n: usize, warp: Arc<WarpSolution>) -> Result<Self> {
        if n < 2 {
            return Err(Error::arg(format!("dimension must be at least 2, got {n}")));
        }
        let inv = warp.invariants();
        if !inv.psi_prime_at_least_one || !inv.phi_positive {
            return Err(Error::Consistency("warp violates psi' >= 1; tangential curvature would be positive".into()));
        }
        if warp.grid().iter().any(|&t| warp.profile().at(t) < 0.0) {
            return Err(Error::Consistency("negative curvature bound: radial curvature would be positive".into()));
        }
        Ok(ModelManifold { n, warp, log_omega: log_unit_ball_volume(n) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn warp(&self) -> &WarpSolution {
        &self.warp
    }

    pub fn warp_arc(&self) -> &Arc<WarpSolution> {
        &self.warp
    }

    /// Largest radius the warp was solved to.
    pub fn r_max(&self) -> f64 {
        self.warp.theta_max()
    }

    /// `ω_n`.
    pub fn unit_ball_volume(&self) -> f64 {
        self.log_omega.exp()
    }

    /// `log(n·ω_n)`, the log-area of the flat unit sphere.
    pub fn log_sphere_area(&self) -> f64 {
        (self.n as f64).ln() + self.log_omega
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(r >= 0.0) || r > self.r_max() * (1.0 + 1e-14) {
            return Err(Error::Range { what: "radius", value: r, lo: 0.0, hi: self.r_max() });
        }
        Ok(())
    }

    /// `(n−1)·log ψ(r)` without range checks.
    #[inline]
    pub(crate) fn log_vol_unchecked(&self, r: f64) -> f64 {
        (self.n - 1) as f64 * self.warp.lp(r)
    }

    /// `ψ(r)^{n−1}`, the density of the Riemannian volume in geodesic polar coordinates.
    pub fn volume_element(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(self.log_vol_unchecked(r).exp())
    }

    /// `(ψ(r)/r)^{n−1}`, the Jacobian of the exponential map at the pole.
    pub fn jacobian_exp(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        if r == 0.0 {
            return Ok(1.0);
        }
        Ok(((self.n - 1) as f64 * self.warp.eval_h(r)?).exp())
    }

    /// `log ∫_a^b w(r)·ψ(r)^{n−1} dr` for a non-negative weight `w` on `[a, b]`.
    pub(crate) fn log_weighted_shell<F: Fn(f64) -> f64>(&self, a: f64, b: f64, w: F) -> f64 {
        if b <= a {
            return f64::NEG_INFINITY;
        }
        // ψ is increasing, so the integrand scale is set by the right end
        let scale = self.log_vol_unchecked(b);
        let res = adaptive(|r| w(r) * (self.log_vol_unchecked(r) - scale).exp(), a, b, 0.0, 1e-13);
        res.value.ln() + scale
    }

    /// `|B_R(o)| = nω_n ∫₀^R ψ^{n−1}`.
    pub fn ball_volume(&self, radius: f64) -> Result<BallVolume> {
        if !(radius > 0.0) {
            return Err(Error::arg("ball radius must be positive"));
        }
        self.check_radius(radius)?;
        let log_volume = self.log_sphere_area() + self.log_weighted_shell(0.0, radius, |_| 1.0);
        if !log_volume.is_finite() {
            return Err(Error::Numerical(format!("ball volume quadrature failed at R = {radius}")));
        }
        let volume = log_volume.exp();
        Ok(BallVolume { log_volume, volume, overflow: !volume.is_finite() })
    }

    /// Logarithms of the product-integration weights `nω_n ∫ hat_i ψ^{n−1}` of a radial grid.
    ///
    /// For a function given by its nodal values and interpolated linearly in
    /// `r`, `Σ f_i·e^{w_i}` is its exact integral against the volume measure.
    pub fn log_hat_weights(&self, grid: &[f64]) -> Result<Vec<f64>> {
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] < 0.0 {
            return Err(Error::arg("radial grid must be strictly increasing, non-negative, with >= 2 nodes"));
        }
        self.check_radius(*grid.last().unwrap())?;
        let cells: Vec<(f64, f64)> = grid
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let h = b - a;
                let left = self.log_weighted_shell(a, b, |r| (b - r) / h);
                let right = self.log_weighted_shell(a, b, |r| (r - a) / h);
                (left, right)
            })
            .collect();
        let base = self.log_sphere_area();
        let mut out = vec![f64::NEG_INFINITY; grid.len()];
        for (i, &(l, r)) in cells.iter().enumerate() {
            out[i] = log_add(out[i], l);
            out[i + 1] = log_add(out[i + 1], r);
        }
        Ok(out.into_iter().map(|w| w + base).collect())
    }

    /// Lower and upper brackets valid for every geodesic distance:
    /// the flat chord (Rauch) and the constant-curvature law of cosines at `max c` on the ball.
    pub fn distance_bracket(&self, r1: f64, r2: f64, alpha: f64) -> (f64, f64) {
        let lower = chord(r1, r2, alpha).max(cosine_lower_bound(r1, r2, alpha));
        let c_star = self.warp.profile().max_on(r1.max(r2));
        let upper = if c_star > 1e-300 { hyperbolic_distance(c_star, r1, r2, alpha) } else { lower };
        (lower, upper.max(lower))
    }

    fn check_distance_args(&self, r1: f64, r2: f64, alpha: f64) -> Result<()> {
        self.check_radius(r1)?;
        self.check_radius(r2)?;
        if !(0.0..=std::f64::consts::PI).contains(&alpha) {
            return Err(Error::Range { what: "angle", value: alpha, lo: 0.0, hi: std::f64::consts::PI });
        }
        Ok(())
    }

    /// Geodesic distance between points at radii `r1`, `r2` separated by angle `alpha` at the pole.
    pub fn distance(&self, r1: f64, r2: f64, alpha: f64, method: DistanceMethod) -> Result<f64> {
        self.check_distance_args(r1, r2, alpha)?;
        match method {
            DistanceMethod::BvpRefined => clairaut::geodesic_distance(self, r1, r2, alpha),
            DistanceMethod::FastMarch => {
                let spec = GridSpec { r_max: r1.max(r2), ..GridSpec::default() };
                let field = self.distance_field(r1, spec)?;
                field.query(r2, alpha)
            }
        }
    }

    /// Distances from `(r1, 0)` to every node of a polar grid, by fast marching.
    pub fn distance_field(&self, r1: f64, spec: GridSpec) -> Result<DistanceField> {
        self.check_radius(r1)?;
        self.check_radius(spec.r_max)?;
        DistanceField::compute(self, r1, spec)
    }

    /// Geodesic family tabulated on a radial grid, for batch pair distances.
    pub fn pair_table(&self, grid: &[f64]) -> Result<PairTable> {
        PairTable::new(self, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::CurvatureProfile;
    use std::f64::consts::PI;

    pub(crate) fn hyperbolic(n: usize, r_max: f64) -> ModelManifold {
        let w = WarpSolution::solve_shared(&CurvatureProfile::constant(1.0).unwrap(), r_max).unwrap();
        ModelManifold::new(n, w).unwrap()
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((log_unit_ball_volume(2).exp() - PI).abs() < 1e-14);
        assert!((log_unit_ball_volume(3).exp() - 4.0 * PI / 3.0).abs() < 1e-13);
        assert!((log_unit_ball_volume(4).exp() - PI * PI / 2.0).abs() < 1e-13);
        assert!((log_unit_ball_volume(1).exp() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn volume_element_and_jacobian() {
        let m2 = hyperbolic(2, 5.0);
        let m3 = hyperbolic(3, 5.0);
        assert!((m2.volume_element(1.0).unwrap() - 1f64.sinh()).abs() < 1e-9);
        assert!((m3.volume_element(1.0).unwrap() - 1f64.sinh().powi(2)).abs() < 1e-9);
        assert!((m2.jacobian_exp(2.0).unwrap() - 2f64.sinh() / 2.0).abs() < 1e-9);
        assert!((m3.jacobian_exp(2.0).unwrap() - (2f64.sinh() / 2.0).powi(2)).abs() < 1e-9);
        assert!((m3.jacobian_exp(1e-6).unwrap() - 1.0).abs() < 1e-11);
        assert!(m3.volume_element(1e-3).unwrap() / 1e-6 - 1.0 < 1e-6);
        assert!(m2.volume_element(6.0).is_err());
    }

    #[test]
    fn ball_volume_closed_form() {
        let m = hyperbolic(2, 6.0);
        for r in [0.5, 1.0, 2.0, 5.0] {
            let v = m.ball_volume(r).unwrap();
            let exact = 2.0 * PI * (r.cosh() - 1.0);
            assert!((v.volume / exact - 1.0).abs() < 1e-9, "{r}: {} vs {exact}", v.volume);
        }
    }

    #[test]
    fn ball_volume_overflow_flag() {
        let w = WarpSolution::solve_shared(&CurvatureProfile::constant(400.0).unwrap(), 40.0).unwrap();
        let m = ModelManifold::new(3, w).unwrap();
        let v = m.ball_volume(40.0).unwrap();
        assert!(v.overflow && v.log_volume.is_finite());
        // log|B| ≈ log(4π) + 2·20·40 − log(4·20²·2·20) asymptotically
        let approx = (4.0 * PI).ln() + 1600.0 - (4.0f64 * 400.0 * 40.0).ln();
        assert!((v.log_volume - approx).abs() < 1e-6, "{} vs {approx}", v.log_volume);
    }

    #[test]
    fn hat_weights_integrate_piecewise_linear_exactly() {
        let m = hyperbolic(2, 3.0);
        let grid: Vec<f64> = (0..=30).map(|i| i as f64 * 0.1).collect();
        let w = m.log_hat_weights(&grid).unwrap();
        let total: f64 = w.iter().map(|x| x.exp()).sum();
        assert!((total / m.ball_volume(3.0).unwrap().volume - 1.0).abs() < 1e-11);
        // ∫ r dV = 2π∫ r sinh r dr, exact for the linear function r
        let first: f64 = grid.iter().zip(&w).map(|(r, x)| r * x.exp()).sum();
        let exact = 2.0 * PI * (3.0 * 3f64.cosh() - 3f64.sinh());
        assert!((first / exact - 1.0).abs() < 1e-11, "{first} vs {exact}");
    }

    #[test]
    fn rejects_low_dimension() {
        let w = WarpSolution::solve_shared(&CurvatureProfile::constant(1.0).unwrap(), 1.0).unwrap();
        assert!(ModelManifold::new(1, w).is_err());
    }
}
