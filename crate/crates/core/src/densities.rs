//! Radial probability densities on a model manifold.
//!
//! A density is stored by its values `ρ(r_i)` per unit Riemannian volume at
//! the nodes of a radial grid and is understood as the piecewise-linear
//! interpolant of those values, vanishing beyond the last node. Integrals
//! against the volume measure use product-integration hat weights (see
//! [`ModelManifold::log_hat_weights`]), which are exact for that interpolant,
//! so normalization holds to round-off and survives refinement.
//!
//! Radial densities are centred at the pole by symmetry, so they all belong
//! to the admissible class without further constraints.

use std::io::{self, Write};

use crate::energy::PairQuadrature;
use crate::geometry::{log_add, ModelManifold};
use crate::output::write_csv;
use crate::quadrature::pairwise_sum;
use crate::{Error, Result};

/// Default number of radial nodes of constructed densities.
pub const DEFAULT_NODES: usize = 512;
/// Tolerance on the unit mass of a density.
pub const MASS_TOL: f64 = 1e-9;
/// Log-density drop, relative to the peak of `ρψ^{n−1}`, at which profiles are truncated.
const TAIL_DROP: f64 = 36.0;

/// Radially symmetric probability density.
#[derive(Debug, Clone)]
pub struct RadialDensity {
    manifold: ModelManifold,
    grid: Vec<f64>,
    values: Vec<f64>,
    /// `log ρ(r_i)`, finite even where `ρ(r_i)` underflows.
    log_values: Vec<f64>,
    /// `log` of the volume weight of each node.
    log_weights: Vec<f64>,
    /// Mass carried by each node, `ρ_i·w_i`.
    masses: Vec<f64>,
}

/// Uniform grid with `nodes` nodes on `[0, r]`.
pub fn uniform_grid(r: f64, nodes: usize) -> Vec<f64> {
    let last = (nodes - 1) as f64;
    (0..nodes).map(|i| if i + 1 == nodes { r } else { r * i as f64 / last }).collect()
}

impl RadialDensity {
    /// Normalizes the log-values `log ρ(r_i)` (−∞ allowed) on `grid` to unit mass.
    pub fn from_log_values(m: &ModelManifold, grid: Vec<f64>, log_values: &[f64]) -> Result<Self> {
        let log_weights = m.log_hat_weights(&grid)?;
        Self::with_weights(m, grid, log_weights, log_values)
    }

    /// Normalizes the non-negative values `ρ(r_i)` on `grid` to unit mass.
    pub fn from_values(m: &ModelManifold, grid: Vec<f64>, values: &[f64]) -> Result<Self> {
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::arg("density values must be finite and non-negative"));
        }
        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        Self::from_log_values(m, grid, &logs)
    }

    pub(crate) fn with_weights(
        m: &ModelManifold,
        grid: Vec<f64>,
        log_weights: Vec<f64>,
        log_values: &[f64],
    ) -> Result<Self> {
        if log_values.len() != grid.len() || log_weights.len() != grid.len() {
            return Err(Error::arg("density values must match the grid"));
        }
        if log_values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Numerical("density log-values must be finite or -inf".into()));
        }
        let log_mass = log_values.iter().zip(&log_weights).fold(f64::NEG_INFINITY, |acc, (v, w)| log_add(acc, v + w));
        if !log_mass.is_finite() {
            return Err(Error::Numerical("density has zero or non-finite mass".into()));
        }
        let log_values: Vec<f64> = log_values.iter().map(|v| v - log_mass).collect();
        let values: Vec<f64> = log_values.iter().map(|v| v.exp()).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("normalized density overflows".into()));
        }
        let masses: Vec<f64> = log_values.iter().zip(&log_weights).map(|(v, w)| (v + w).exp()).collect();
        Ok(RadialDensity { manifold: m.clone(), grid, values, log_values, log_weights, masses })
    }

    /// `ρ_R = 1/|B_R(o)|` on the ball of radius `R`, on [`DEFAULT_NODES`] nodes.
    pub fn uniform_ball(m: &ModelManifold, radius: f64) -> Result<Self> {
        Self::uniform_ball_with(m, radius, DEFAULT_NODES)
    }

    /// Uniform ball on a grid of `nodes` nodes ending exactly at the radius.
    pub fn uniform_ball_with(m: &ModelManifold, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::arg("ball radius must be positive"));
        }
        if radius > m.r_max() {
            return Err(Error::Range { what: "ball radius", value: radius, lo: 0.0, hi: m.r_max() });
        }
        Self::check_nodes(nodes)?;
        let grid = uniform_grid(radius, nodes);
        let log_volume = m.ball_volume(radius)?.log_volume;
        let logs = vec![-log_volume; nodes];
        Self::from_log_values(m, grid, &logs)
    }

    /// Uniform ball on the leading nodes of an existing grid, up to and including node `last`.
    pub fn uniform_ball_on(m: &ModelManifold, grid: &[f64], last: usize) -> Result<Self> {
        if last == 0 || last >= grid.len() {
            return Err(Error::arg("ball must span at least one grid cell"));
        }
        let sub = grid[..=last].to_vec();
        let logs = vec![0.0; sub.len()];
        Self::from_log_values(m, sub, &logs)
    }

    /// `ρ ∝ exp(−r²/(2s²))`, normalized against the volume element, on [`DEFAULT_NODES`] nodes.
    pub fn exp_profile(m: &ModelManifold, s: f64) -> Result<Self> {
        Self::exp_profile_with(m, s, DEFAULT_NODES)
    }

    /// Gaussian-in-radius profile on `nodes` nodes, truncated where `ρψ^{n−1}` has dropped by `e^{-36}`.
    pub fn exp_profile_with(m: &ModelManifold, s: f64, nodes: usize) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::arg("profile width must be positive"));
        }
        Self::check_nodes(nodes)?;
        let log_rho = |r: f64| -r * r / (2.0 * s * s);
        let radius = profile_cutoff(m, |r| log_rho(r) + m.log_vol_unchecked(r))?;
        Self::exp_profile_on(m, s, radius, nodes)
    }

    /// The same profile restricted to the ball of the given radius.
    ///
    /// Needed where `e^{−r²/(2s²)}ψ^{n−1}` is not integrable, e.g. when
    /// `log ψ` grows quadratically.
    pub fn exp_profile_on(m: &ModelManifold, s: f64, radius: f64, nodes: usize) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::arg("profile width must be positive"));
        }
        if !(radius > 0.0) || radius > m.r_max() {
            return Err(Error::Range { what: "profile radius", value: radius, lo: 0.0, hi: m.r_max() });
        }
        Self::check_nodes(nodes)?;
        let grid = uniform_grid(radius, nodes);
        let logs: Vec<f64> = grid.iter().map(|&r| -r * r / (2.0 * s * s)).collect();
        Self::from_log_values(m, grid, &logs)
    }

    fn check_nodes(nodes: usize) -> Result<()> {
        if nodes < 3 {
            return Err(Error::arg("densities need at least 3 grid nodes"));
        }
        Ok(())
    }

    pub fn manifold(&self) -> &ModelManifold {
        &self.manifold
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// `ρ(r_i)` per unit volume.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `log ρ(r_i)`; `-inf` where the density vanishes.
    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    /// Logarithms of the volume weights of the nodes.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Mass carried by each node.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Largest radius of the grid; the density vanishes beyond it.
    pub fn support_end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Total mass; 1 up to round-off.
    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.masses)
    }

    /// `∫ f(θ_x) ρ(x) dx` for a radial function `f`, with the density's quadrature.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.masses)
            .map(|(&r, &mass)| if mass == 0.0 { 0.0 } else { f(r) * mass })
            .collect();
        pairwise_sum(&terms)
    }

    /// `W₁(ρ, δ_o) = ∫ θ_x ρ(x) dx`: transport to a point costs the first moment.
    pub fn w1_to_pole(&self) -> f64 {
        self.expect(|r| r)
    }

    /// Mass in `B_{r_i}(o)` at every node, by the same quadrature.
    pub fn cumulative_mass(&self) -> Vec<f64> {
        // the hat of node i straddles r_i; split each hat at its node using the cell halves
        let mut out = Vec::with_capacity(self.grid.len());
        let mut acc = 0.0;
        for (i, &mass) in self.masses.iter().enumerate() {
            let left = if i == 0 {
                0.0
            } else {
                self.hat_fraction(i, true)
            };
            out.push(acc + mass * left);
            acc += mass;
        }
        out
    }

    /// Fraction of the volume weight of node `i` lying to its left (`left`) or right.
    fn hat_fraction(&self, i: usize, left: bool) -> f64 {
        let m = &self.manifold;
        let g = &self.grid;
        let l = if i > 0 {
            let (a, b) = (g[i - 1], g[i]);
            m.log_weighted_shell(a, b, |r| (r - a) / (b - a))
        } else {
            f64::NEG_INFINITY
        };
        let r = if i + 1 < g.len() {
            let (a, b) = (g[i], g[i + 1]);
            m.log_weighted_shell(a, b, |r| (b - r) / (b - a))
        } else {
            f64::NEG_INFINITY
        };
        let total = log_add(l, r);
        if left {
            (l - total).exp()
        } else {
            (r - total).exp()
        }
    }

    /// Smallest grid radius with cumulative mass at least `1 − eps`.
    pub fn support_radius(&self, eps: f64) -> f64 {
        let cum = self.cumulative_mass();
        let total = self.mass();
        self.grid.iter().zip(&cum).find(|(_, c)| **c >= total - eps).map_or(self.support_end(), |(r, _)| *r)
    }

    /// Mass carried by nodes in the outer `fraction` of the radial grid.
    pub fn outer_mass(&self, fraction: f64) -> f64 {
        let cut = self.support_end() * (1.0 - fraction);
        let outer: Vec<f64> = self.grid.iter().zip(&self.masses).filter(|(r, _)| **r > cut).map(|(_, m)| *m).collect();
        pairwise_sum(&outer)
    }

    /// Linear interpolation onto a grid refined `factor` times, renormalized.
    ///
    /// Returns the refined density and the mass drift before renormalization,
    /// which measures the consistency of the two quadratures.
    pub fn refine(&self, factor: usize) -> Result<(RadialDensity, f64)> {
        if factor < 1 {
            return Err(Error::arg("refinement factor must be at least 1"));
        }
        // interpolate ρ linearly, scaled by its largest value so that nothing underflows
        let shift = self.log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = self.log_values.iter().map(|v| (v - shift).exp()).collect();
        let mut grid = Vec::with_capacity((self.grid.len() - 1) * factor + 1);
        let mut vals = Vec::with_capacity(grid.capacity());
        for w in 0..self.grid.len() - 1 {
            let (a, b) = (self.grid[w], self.grid[w + 1]);
            let (va, vb) = (scaled[w], scaled[w + 1]);
            for q in 0..factor {
                let t = q as f64 / factor as f64;
                grid.push(a + t * (b - a));
                vals.push(va + t * (vb - va));
            }
        }
        grid.push(self.support_end());
        vals.push(*scaled.last().unwrap());
        let log_weights = self.manifold.log_hat_weights(&grid)?;
        let logs: Vec<f64> = vals.iter().map(|v| v.ln() + shift).collect();
        let drift =
            pairwise_sum(&logs.iter().zip(&log_weights).map(|(v, w)| (v + w).exp()).collect::<Vec<_>>()) - 1.0;
        Ok((Self::with_weights(&self.manifold, grid, log_weights, &logs)?, drift))
    }

    /// The density restricted to every other node (keeping the last), renormalized.
    pub fn coarsen(&self) -> Result<RadialDensity> {
        let idx = coarse_indices(self.grid.len());
        let grid: Vec<f64> = idx.iter().map(|&i| self.grid[i]).collect();
        let logs: Vec<f64> = idx.iter().map(|&i| self.log_values[i]).collect();
        Self::from_log_values(&self.manifold, grid, &logs)
    }

    /// `∬ d(x, y) ρ(x) ρ(y) dx dy`.
    pub fn pairwise_distance_integral(&self) -> Result<f64> {
        let pq = PairQuadrature::new(&self.manifold, &self.grid)?;
        let k = pq.kernel(&|d| d);
        Ok(k.quadratic_form(self)?.value)
    }

    /// Writes `r, rho, cumulative_mass`.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let cum = self.cumulative_mass();
        let rows = (0..self.grid.len()).map(|i| vec![self.grid[i], self.values[i], cum[i]]);
        write_csv(w, &["r", "rho", "cumulative_mass"], rows)
    }
}

/// Every other index of `0..len`, always including the last.
pub(crate) fn coarse_indices(len: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).step_by(2).collect();
    if *idx.last().unwrap() != len - 1 {
        idx.push(len - 1);
    }
    idx
}

/// Radius beyond which the unimodal log-integrand `g` stays more than [`TAIL_DROP`] below its peak.
fn profile_cutoff<G: Fn(f64) -> f64>(m: &ModelManifold, g: G) -> Result<f64> {
    let r_max = m.r_max();
    let samples = 4096;
    let step = r_max / samples as f64;
    let mut peak = f64::NEG_INFINITY;
    let mut peak_r = 0.0;
    for i in 1..=samples {
        let r = i as f64 * step;
        let v = g(r);
        if v > peak {
            peak = v;
            peak_r = r;
        } else if v < peak - TAIL_DROP {
            // refine the crossing within the last step
            let (mut lo, mut hi) = ((r - step).max(peak_r), r);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < peak - TAIL_DROP {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(hi);
        }
    }
    Err(Error::Range { what: "profile tail beyond warp range", value: r_max, lo: 0.0, hi: r_max })
}
