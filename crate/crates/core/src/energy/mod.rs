//! Entropy, interaction energy and free energy of radial densities, and the
//! functional inequalities relating them to the geometry.
//!
//! The free energy is `E[ρ] = ∫ ρ log ρ + ½ ∬ h(d(x, y)) ρ(x) ρ(y)`.

mod potential;
mod quadrature;

use serde::{Deserialize, Serialize};

pub use potential::{InteractionPotential, PotentialKind};
pub use quadrature::{
    angular_cdf, angular_ks_statistic, AngularRule, KernelMatrix, PairQuadrature, QuadValue, ANGULAR_NODES,
};

use crate::densities::RadialDensity;
use crate::geometry::ModelManifold;
use crate::quadrature::pairwise_sum;
use crate::verdict::{CriterionVerdict, Verdict};
use crate::{Error, Result};

/// Relative slack of the Jensen comparison.
pub const JENSEN_REL_TOL: f64 = 1e-8;
/// Slope the coercive envelope must reach, `(2 − √2)/2`, less this margin.
pub const COERCIVITY_SLOPE_MARGIN: f64 = 0.05;
/// Smallest family accepted by [`coercivity_check`].
pub const COERCIVITY_MIN_FAMILY: usize = 5;

/// Free energy split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub entropy: f64,
    pub interaction: f64,
    pub total: f64,
    /// Refinement estimate of the quadrature error of `total`.
    #[serde(rename = "quad_error")]
    pub quadrature_error: f64,
}

/// `∫ ρ log ρ` with `0·log 0 = 0`.
pub fn entropy(rho: &RadialDensity) -> f64 {
    let terms: Vec<f64> = rho
        .log_values()
        .iter()
        .zip(rho.masses())
        .map(|(&v, &m)| if m > 0.0 { m * v } else { 0.0 })
        .collect();
    pairwise_sum(&terms)
}

/// `½ ∬ h(d) ρρ`, building the pair quadrature on the density's grid.
pub fn interaction(rho: &RadialDensity, h: &InteractionPotential) -> Result<QuadValue> {
    EnergyEvaluator::new(rho.manifold(), rho.grid(), h)?.interaction(rho)
}

/// Entropy plus interaction, building the pair quadrature on the density's grid.
pub fn free_energy(rho: &RadialDensity, h: &InteractionPotential) -> Result<EnergyBreakdown> {
    EnergyEvaluator::new(rho.manifold(), rho.grid(), h)?.free_energy(rho)
}

/// Free energy evaluator for every density living on a leading part of one radial grid.
#[derive(Debug, Clone)]
pub struct EnergyEvaluator {
    potential: InteractionPotential,
    /// `K_ij = ∫ h(d(r_i, r_j, α)) q_n(α) dα`; `None` for `h ≡ 0`.
    kernel: Option<KernelMatrix>,
    grid: Vec<f64>,
}

impl EnergyEvaluator {
    pub fn new(m: &ModelManifold, grid: &[f64], h: &InteractionPotential) -> Result<Self> {
        h.validate()?;
        let kernel = if h.is_zero() {
            m.log_hat_weights(grid)?;
            None
        } else {
            let pq = PairQuadrature::new(m, grid)?;
            Some(Self::kernel_for(&pq, h))
        };
        Ok(EnergyEvaluator { potential: h.clone(), kernel, grid: grid.to_vec() })
    }

    /// Reuses an existing pair quadrature.
    pub fn from_pairs(pq: &PairQuadrature, h: &InteractionPotential) -> Result<Self> {
        h.validate()?;
        let kernel = if h.is_zero() { None } else { Some(Self::kernel_for(pq, h)) };
        Ok(EnergyEvaluator { potential: h.clone(), kernel, grid: pq.grid().to_vec() })
    }

    fn kernel_for(pq: &PairQuadrature, h: &InteractionPotential) -> KernelMatrix {
        let hk = h.h.clone();
        pq.kernel(&move |d| hk.eval(d))
    }

    pub fn potential(&self) -> &InteractionPotential {
        &self.potential
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn check_grid(&self, rho: &RadialDensity) -> Result<()> {
        let g = rho.grid();
        if g.len() > self.grid.len() || g.iter().zip(&self.grid).any(|(a, b)| a != b) {
            return Err(Error::State("density grid is not a leading part of the evaluator grid".into()));
        }
        Ok(())
    }

    /// `½ ∬ h(d) ρρ`.
    pub fn interaction(&self, rho: &RadialDensity) -> Result<QuadValue> {
        self.check_grid(rho)?;
        match &self.kernel {
            None => Ok(QuadValue { value: 0.0, error: 0.0 }),
            Some(k) => {
                let q = k.quadratic_form(rho)?;
                Ok(QuadValue { value: 0.5 * q.value, error: 0.5 * q.error })
            }
        }
    }

    /// `(h∗ρ)(r_i) = ∫ h(d(x_i, y)) ρ(y) dy` at every node of the evaluator grid.
    pub fn convolution(&self, rho: &RadialDensity) -> Result<Vec<f64>> {
        self.check_grid(rho)?;
        match &self.kernel {
            None => Ok(vec![0.0; self.grid.len()]),
            Some(k) => k.apply(rho),
        }
    }

    pub fn free_energy(&self, rho: &RadialDensity) -> Result<EnergyBreakdown> {
        let inter = self.interaction(rho)?;
        let s = entropy(rho);
        let s_err = if rho.grid().len() >= 5 { (s - entropy(&rho.coarsen()?)).abs() } else { 0.0 };
        Ok(EnergyBreakdown {
            entropy: s,
            interaction: inter.value,
            total: s + inter.value,
            quadrature_error: inter.error + s_err,
        })
    }
}

/// Intermediate quantities of the logarithmic HLS gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HlsGap {
    /// `(1/n)∫ρ log ρ + ((n−1)/n)∫H(θ_x)ρ + ∬ log d ρρ`.
    pub gap: f64,
    pub entropy: f64,
    /// `∫ H(θ_x) ρ`, the log-Jacobian of the exponential map averaged against `ρ`.
    pub jacobian_term: f64,
    /// `∬ log d(x, y) ρρ`.
    pub log_distance: f64,
    /// `∬ log |log_o x − log_o y| ρρ`, the same integral for the flat pushforward.
    pub log_chord: f64,
    /// Flat log-HLS gap of the pushforward `ρ̃ = (ρ∘exp_o)·J`.
    pub flat_gap: f64,
    /// `∫ ρ̃ log ρ̃` computed in flat coordinates.
    pub pushforward_entropy: f64,
    /// `|∫ρ̃ log ρ̃ − (∫ρ log ρ + (n−1)∫Hρ)|` relative to the larger magnitude.
    pub pushforward_residual: f64,
    /// `∬ log d ρρ ≥ ∬ log |log_o x − log_o y| ρρ`.
    pub distance_bound_holds: bool,
    pub quadrature_error: f64,
}

/// Tolerance on the relative pushforward residual.
pub const PUSHFORWARD_TOL: f64 = 1e-3;

/// The logarithmic HLS gap, whose infimum over densities is `−C₀` for a dimensional constant `C₀`.
pub fn hls_gap(rho: &RadialDensity) -> Result<HlsGap> {
    hls_gap_with(&PairQuadrature::new(rho.manifold(), rho.grid())?, rho)
}

/// [`hls_gap`] with a prebuilt pair quadrature on a grid the density's grid is a leading part of.
pub fn hls_gap_with(pq: &PairQuadrature, rho: &RadialDensity) -> Result<HlsGap> {
    let m = rho.manifold();
    let n = m.dim() as f64;
    let warp = m.warp();
    let s = entropy(rho);
    let jac = rho.expect(|r| warp.h_and_slope(r).0);
    let ld = pq.log_kernel().quadratic_form(rho)?;
    let lc = pq.log_chord_kernel().quadratic_form(rho)?;
    if !ld.value.is_finite() || !jac.is_finite() {
        return Err(Error::arg("density has no finite logarithmic moment"));
    }
    let flat_logw = flat_log_hat_weights(m.dim(), rho.grid(), m.log_sphere_area());
    let pf_terms: Vec<f64> = rho
        .grid()
        .iter()
        .zip(rho.log_values())
        .zip(&flat_logw)
        .map(|((&r, &v), &w)| {
            if v == f64::NEG_INFINITY {
                return 0.0;
            }
            let log_pf = v + (n - 1.0) * warp.h_and_slope(r).0;
            log_pf * (log_pf + w).exp()
        })
        .collect();
    let pushforward_entropy = pairwise_sum(&pf_terms);
    let predicted = s + (n - 1.0) * jac;
    let pushforward_residual =
        (pushforward_entropy - predicted).abs() / pushforward_entropy.abs().max(predicted.abs()).max(1.0);
    let gap = s / n + (n - 1.0) / n * jac + ld.value;
    let slack = 1e-9 * ld.value.abs().max(1.0);
    Ok(HlsGap {
        gap,
        entropy: s,
        jacobian_term: jac,
        log_distance: ld.value,
        log_chord: lc.value,
        flat_gap: s / n + (n - 1.0) / n * jac + lc.value,
        pushforward_entropy,
        pushforward_residual,
        distance_bound_holds: ld.value >= lc.value - slack,
        quadrature_error: ld.error,
    })
}

/// Hat weights of a radial grid in flat `ℝⁿ`: `nω_n ∫ hat_i r^{n−1} dr`, in closed form.
fn flat_log_hat_weights(n: usize, grid: &[f64], log_sphere: f64) -> Vec<f64> {
    // ∫_a^b (r − a)/h r^{k} dr and ∫_a^b (b − r)/h r^{k} dr with k = n − 1
    let k = (n - 1) as i32;
    let mono = |a: f64, b: f64, p: i32| (b.powi(p + 1) - a.powi(p + 1)) / (p + 1) as f64;
    let mut w = vec![0.0; grid.len()];
    for c in grid.windows(2).enumerate() {
        let (i, ab) = c;
        let (a, b) = (ab[0], ab[1]);
        let h = b - a;
        let m0 = mono(a, b, k);
        let m1 = mono(a, b, k + 1);
        w[i] += (b * m0 - m1) / h;
        w[i + 1] += (m1 - a * m0) / h;
    }
    w.into_iter().map(|x| x.ln() + log_sphere).collect()
}

/// Jensen's inequality `∬ H(d(x, y)) ρρ ≥ ∫ H(θ_x) ρ` for a centred density.
pub fn jensen_check(rho: &RadialDensity) -> Result<CriterionVerdict> {
    jensen_check_with(&PairQuadrature::new(rho.manifold(), rho.grid())?, rho)
}

/// [`jensen_check`] with a prebuilt pair quadrature.
pub fn jensen_check_with(pq: &PairQuadrature, rho: &RadialDensity) -> Result<CriterionVerdict> {
    let m = rho.manifold();
    let reach = 2.0 * rho.support_end();
    if reach > m.r_max() {
        return Err(Error::Range { what: "pair distances for H", value: reach, lo: 0.0, hi: m.r_max() });
    }
    let warp = m.warp_arc().clone();
    let k = pq.kernel(&move |d| warp.h_and_slope(d).0);
    let lhs = k.quadratic_form(rho)?.value;
    let rhs = rho.expect(|r| m.warp().h_and_slope(r).0);
    let ok = lhs >= rhs - JENSEN_REL_TOL * rhs.abs();
    let v = CriterionVerdict::new("jensen");
    let note = format!("double integral {lhs:.12e} vs single integral {rhs:.12e}");
    Ok(if ok { v.with(Verdict::Satisfied, lhs - rhs, note) } else { v.with(Verdict::Violated, lhs - rhs, note) })
}

/// `(2−√2)·W₁ ≤ ∬ d ρρ ≤ 2·W₁` with `W₁ = W₁(ρ, δ_o)`.
pub fn w1_sandwich(rho: &RadialDensity) -> Result<CriterionVerdict> {
    w1_sandwich_with(&PairQuadrature::new(rho.manifold(), rho.grid())?, rho)
}

/// [`w1_sandwich`] with a prebuilt pair quadrature.
pub fn w1_sandwich_with(pq: &PairQuadrature, rho: &RadialDensity) -> Result<CriterionVerdict> {
    let dd = pq.kernel(&|d| d).quadratic_form(rho)?.value;
    let w1 = rho.w1_to_pole();
    let (lo, hi) = ((2.0 - 2f64.sqrt()) * w1, 2.0 * w1);
    let slack = 1e-12 * w1;
    let v = CriterionVerdict { probes: vec![(w1, dd)], ..CriterionVerdict::new("w1_sandwich") };
    let note = format!("{lo:.12e} <= {dd:.12e} <= {hi:.12e}");
    // trend: the smaller relative margin to either bound
    let margin = ((dd - lo) / w1).min((hi - dd) / w1);
    Ok(if lo - slack <= dd && dd <= hi + slack {
        v.with(Verdict::Satisfied, margin, note)
    } else {
        v.with(Verdict::Violated, margin, note)
    })
}

/// Coercivity `E[ρ] ≳ ((2−√2)/2)·W₁(ρ, δ_o)` along a family, from precomputed `(W₁, E)` points.
///
/// The family admits an affine minorant touching its far end with slope `s`
/// iff `s` is at most the slope of the last edge of the lower convex hull of
/// the points; that slope is the trend compared with the threshold.
pub fn coercivity_from_points(points: &[(f64, f64)]) -> Result<CriterionVerdict> {
    if points.len() < COERCIVITY_MIN_FAMILY {
        return Err(Error::arg(format!("coercivity check needs at least {COERCIVITY_MIN_FAMILY} densities")));
    }
    if points.iter().any(|(w, e)| !w.is_finite() || !e.is_finite()) {
        return Err(Error::Numerical("non-finite energy or transport distance in family".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (wl, el) = *pts.last().unwrap();
    let slope = pts[..pts.len() - 1]
        .iter()
        .filter(|(w, _)| *w < wl)
        .map(|(w, e)| (el - e) / (wl - w))
        .fold(f64::INFINITY, f64::min);
    if !slope.is_finite() {
        return Err(Error::arg("coercivity family needs distinct transport distances"));
    }
    let target = (2.0 - 2f64.sqrt()) / 2.0 - COERCIVITY_SLOPE_MARGIN;
    let v = CriterionVerdict { probes: pts, ..CriterionVerdict::new("coercivity") };
    let note = format!("envelope slope {slope:.6} against threshold {target:.6}");
    Ok(if slope >= target { v.with(Verdict::Satisfied, slope, note) } else { v.with(Verdict::Violated, slope, note) })
}

/// Coercivity along a family of densities.
pub fn coercivity_check(family: &[RadialDensity], h: &InteractionPotential) -> Result<CriterionVerdict> {
    if family.len() < COERCIVITY_MIN_FAMILY {
        return Err(Error::arg(format!("coercivity check needs at least {COERCIVITY_MIN_FAMILY} densities")));
    }
    let points = family
        .iter()
        .map(|rho| Ok((rho.w1_to_pole(), free_energy(rho, h)?.total)))
        .collect::<Result<Vec<_>>>()?;
    coercivity_from_points(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::CurvatureProfile;
    use crate::densities::uniform_grid;
    use crate::warp::WarpSolution;
    use std::f64::consts::PI;

    fn manifold(profile: CurvatureProfile, n: usize, r_max: f64) -> ModelManifold {
        ModelManifold::new(n, WarpSolution::solve_shared(&profile, r_max).unwrap()).unwrap()
    }

    fn hyperbolic(n: usize, r_max: f64) -> ModelManifold {
        manifold(CurvatureProfile::constant(1.0).unwrap(), n, r_max)
    }

    #[test]
    fn uniform_ball_entropy() {
        let m = hyperbolic(2, 4.0);
        let rho = RadialDensity::uniform_ball_with(&m, 1.0, 65).unwrap();
        let exact = -(2.0 * PI * (1f64.cosh() - 1.0)).ln();
        assert!((entropy(&rho) - exact).abs() < 1e-12);
        assert!((exact + 1.2274).abs() < 1e-4);
        let e = free_energy(&rho, &InteractionPotential::zero()).unwrap();
        assert_eq!(e.total, e.entropy);
        assert_eq!(e.interaction, 0.0);
    }

    #[test]
    fn flat_entropy_scaling() {
        let m = manifold(CurvatureProfile::constant(1e-12).unwrap(), 2, 12.0);
        let a = entropy(&RadialDensity::exp_profile_with(&m, 0.5, 257).unwrap());
        let b = entropy(&RadialDensity::exp_profile_with(&m, 1.0, 257).unwrap());
        assert!(((a - b) - 2.0 * 2f64.ln()).abs() < 1e-4, "{}", a - b);
    }

    #[test]
    fn flat_disk_interaction() {
        let m = manifold(CurvatureProfile::constant(1e-12).unwrap(), 2, 3.0);
        let rho = RadialDensity::uniform_ball_with(&m, 1.0, 129).unwrap();
        let e = free_energy(&rho, &InteractionPotential::power(1.0, 1.0).unwrap()).unwrap();
        assert!((e.interaction - 64.0 / (45.0 * PI)).abs() < 1e-4);
        assert_eq!(e.total, e.entropy + e.interaction);
        let json = serde_json::to_value(e).unwrap();
        assert!(json.get("quad_error").is_some());
    }

    #[test]
    fn ball_bound_and_monotonicity_in_h() {
        let m = hyperbolic(2, 6.0);
        let rho = RadialDensity::uniform_ball_with(&m, 2.0, 65).unwrap();
        let pq = PairQuadrature::new(&m, rho.grid()).unwrap();
        let h1 = InteractionPotential::power(1.0, 1.0).unwrap();
        let h2 = InteractionPotential::power(1.0, 2.0).unwrap();
        let i1 = EnergyEvaluator::from_pairs(&pq, &h1).unwrap().interaction(&rho).unwrap().value;
        // θ ≤ θ² fails below 1, so compare with θ + θ²
        let h3 = InteractionPotential::new(PotentialKind::Tabulated {
            nodes: (0..=40).map(|i| i as f64 * 0.25).collect(),
            values: (0..=40).map(|i| i as f64 * 0.25 + (i as f64 * 0.25).powi(2)).collect(),
        })
        .unwrap();
        let i3 = EnergyEvaluator::from_pairs(&pq, &h3).unwrap().interaction(&rho).unwrap().value;
        assert!(i1 <= i3);
        let i2 = EnergyEvaluator::from_pairs(&pq, &h2).unwrap().interaction(&rho).unwrap().value;
        assert!(i2 <= 0.5 * 16.0);
        assert!(i1 <= 0.5 * 4.0);
        let bv = m.ball_volume(2.0).unwrap();
        let e = EnergyEvaluator::from_pairs(&pq, &h2).unwrap().free_energy(&rho).unwrap();
        assert!(e.total <= -bv.log_volume + 8.0);
    }

    #[test]
    fn pairwise_distance_sandwich() {
        let m = hyperbolic(2, 8.0);
        for rho in [
            RadialDensity::uniform_ball_with(&m, 1.0, 65).unwrap(),
            RadialDensity::exp_profile_with(&m, 0.7, 65).unwrap(),
        ] {
            let w1 = rho.w1_to_pole();
            let dd = rho.pairwise_distance_integral().unwrap();
            assert!((2.0 - 2f64.sqrt()) * w1 <= dd && dd <= 2.0 * w1, "{w1} {dd}");
            let v = w1_sandwich(&rho).unwrap();
            assert!(v.is_satisfied() && v.trend > 0.0, "{}", v.note);
        }
    }

    #[test]
    fn hls_gap_in_flat_space_matches_disk() {
        // uniform unit disk: (1/2)(−log π) + (−1/4)
        let m = manifold(CurvatureProfile::constant(1e-12).unwrap(), 2, 3.0);
        let rho = RadialDensity::uniform_ball_with(&m, 1.0, 129).unwrap();
        let g = hls_gap(&rho).unwrap();
        assert!((g.gap - (-0.5 * PI.ln() - 0.25)).abs() < 1e-4, "{}", g.gap);
        assert!(g.jacobian_term.abs() < 1e-9);
        assert!(g.distance_bound_holds);
        assert!(g.pushforward_residual < 1e-9);
    }

    #[test]
    fn hls_gap_checks_on_hyperbolic_plane() {
        let m = hyperbolic(2, 12.0);
        let rho = RadialDensity::exp_profile_with(&m, 1.0, 129).unwrap();
        let g = hls_gap(&rho).unwrap();
        assert!(g.distance_bound_holds);
        assert!(g.log_distance > g.log_chord);
        assert!(g.pushforward_residual < PUSHFORWARD_TOL, "{}", g.pushforward_residual);
        assert!((g.gap - g.flat_gap - (g.log_distance - g.log_chord)).abs() < 1e-12);
    }

    #[test]
    fn jensen_examples() {
        let m = hyperbolic(2, 4.0);
        let rho = RadialDensity::uniform_ball_with(&m, 1.0, 65).unwrap();
        assert!(jensen_check(&rho).unwrap().is_satisfied());
        // e^{-r²/2}ψ² is not integrable for c = θ², so the profile is cut at r = 3
        let m3 = manifold(CurvatureProfile::power(2.0, 1.0).unwrap(), 3, 6.0);
        assert!(RadialDensity::exp_profile_with(&m3, 1.0, 65).is_err());
        let rho = RadialDensity::exp_profile_on(&m3, 1.0, 3.0, 65).unwrap();
        assert!(jensen_check(&rho).unwrap().is_satisfied());
        let tiny = RadialDensity::exp_profile_with(&m, 1e-2, 65).unwrap();
        let v = jensen_check(&tiny).unwrap();
        assert!(v.is_satisfied() && v.trend.abs() < 1e-3, "{}", v.note);
    }

    #[test]
    fn coercivity_verdicts() {
        let m = hyperbolic(2, 17.0);
        let grid = uniform_grid(8.0, 129);
        let pq = PairQuadrature::new(&m, &grid).unwrap();
        let points = |h: &InteractionPotential| {
            let ev = EnergyEvaluator::from_pairs(&pq, h).unwrap();
            (1..=8)
                .map(|r| {
                    let rho = RadialDensity::uniform_ball_on(&m, &grid, 16 * r).unwrap();
                    (rho.w1_to_pole(), ev.free_energy(&rho).unwrap().total)
                })
                .collect::<Vec<_>>()
        };
        let strong = coercivity_from_points(&points(&InteractionPotential::power(1.0, 2.0).unwrap())).unwrap();
        assert!(strong.is_satisfied(), "{}", strong.note);
        let weak = coercivity_from_points(&points(&InteractionPotential::power(0.1, 1.0).unwrap())).unwrap();
        assert_eq!(weak.verdict, Verdict::Violated, "{}", weak.note);
        assert!(coercivity_from_points(&[(1.0, 1.0)]).unwrap_err().is_argument());
    }
}
