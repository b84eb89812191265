//! Geodesic distances between all pairs of radii of a grid, at many angles at once.
//!
//! Every geodesic of the surface of revolution belongs to the one-parameter
//! family indexed by its turning radius `τ`. For a dense set of `τ` the
//! cumulative Clairaut integrals `F_τ(r) = ∫_τ^r dφ` and `S_τ(r) = ∫_τ^r ds`
//! are tabulated at the grid radii. For radii `r_i ≤ r_j` the member `τ ≤ r_i`
//! joins them with angle `F_τ(r_i) + F_τ(r_j)` if it turns, or
//! `F_τ(r_j) − F_τ(r_i)` if it does not, and length `S_τ(r_i) ± S_τ(r_j)`.
//! Sweeping `τ` traces the whole curve `α ↦ d(r_i, r_j, α)` from `α = 0` to
//! `π`; distances at requested angles are interpolated on it with cubic
//! Hermite polynomials, using the first variation `∂d/∂α = ψ(τ)` as slope.

use rayon::prelude::*;

use super::clairaut::Turning;
use super::ModelManifold;
use crate::interp::hermite;
use crate::quadrature::adaptive_pair;
use crate::{Error, Result};

/// Minimum number of extra turning radii inserted inside each grid cell, clustered towards its right end.
const INTERIOR_TAUS: usize = 7;
/// Target spacing of the swept angle between consecutive turning radii.
const ANGLE_STEP: f64 = 0.06;
/// Geometric refinement of turning radii towards the pole.
const POLE_TAUS: usize = 12;
/// Geometric refinement of turning radii towards each grid radius from below, where
/// the swept angle behaves like the square root of the distance to the radius.
const APPROACH_TAUS: i32 = 8;

/// Tabulated Clairaut integrals for one turning radius.
#[derive(Debug, Clone)]
struct Member {
    /// Clairaut constant `ψ(τ)`.
    clairaut: f64,
    /// First grid index with `r ≥ τ`.
    first: usize,
    /// `(F_τ(r_i), S_τ(r_i))` for `i ≥ first`.
    sweeps: Vec<(f64, f64)>,
}

impl Member {
    #[inline]
    fn at(&self, i: usize) -> (f64, f64) {
        self.sweeps[i - self.first]
    }
}

/// Geodesic family tabulated on a radial grid.
#[derive(Debug, Clone)]
pub struct PairTable {
    radii: Vec<f64>,
    members: Vec<Member>,
    /// Index into `members` of the member turning exactly at each grid radius (unused at the pole).
    member_of_radius: Vec<usize>,
}

/// One sample of the curve `α ↦ d`.
#[derive(Debug, Clone, Copy)]
struct Sample {
    alpha: f64,
    length: f64,
    slope: f64,
}

fn member(m: &ModelManifold, radii: &[f64], tau: f64) -> Member {
    let t = Turning::new(m, tau);
    let first = radii.partition_point(|&r| r < tau);
    let mut sweeps = Vec::with_capacity(radii.len() - first);
    let mut acc = (0.0, 0.0);
    let mut prev = tau;
    for &r in &radii[first..] {
        if r > prev {
            let d0 = m.warp().lp(prev) - t.lp;
            // far from the turning point the geodesic is radial to machine precision
            if d0 > 40.0 {
                acc.1 += r - prev;
            } else {
                let ua = (prev - tau).max(0.0).sqrt();
                let ub = (r - tau).sqrt();
                let [fa, fs] = adaptive_pair(|u| integrands(m, &t, u), ua, ub, 1e-300, 1e-12);
                acc.0 += fa;
                acc.1 += fs;
            }
        }
        sweeps.push(acc);
        prev = r;
    }
    Member { clairaut: t.clairaut(), first, sweeps }
}

#[inline]
fn integrands(m: &ModelManifold, t: &Turning, u: f64) -> (f64, f64) {
    let u2 = u * u;
    let d = if t.phi * u2 < 1e-5 {
        t.phi * u2 + 0.5 * (t.c - t.phi * t.phi) * u2 * u2
    } else {
        m.warp().lp(t.tau + u2) - t.lp
    };
    let root = (-(-2.0 * d).exp_m1()).sqrt();
    (2.0 * u * (-2.0 * d - t.lp).exp() / root, 2.0 * u / root)
}

impl PairTable {
    /// Tabulates the geodesic family for the radii of `grid` (strictly increasing, non-negative).
    pub fn new(m: &ModelManifold, grid: &[f64]) -> Result<Self> {
        if grid.len() < 2 || grid[0] < 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::arg("radial grid must be strictly increasing and non-negative"));
        }
        if *grid.last().unwrap() > m.r_max() * (1.0 + 1e-14) {
            return Err(Error::Range { what: "grid radius", value: *grid.last().unwrap(), lo: 0.0, hi: m.r_max() });
        }
        let mut taus = Vec::new();
        let mut member_of_radius = vec![usize::MAX; grid.len()];
        let mut prev = 0.0;
        for (i, &r) in grid.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            if prev == 0.0 {
                for l in (1..=POLE_TAUS).rev() {
                    taus.push(r * 0.5f64.powi(l as i32 + 2));
                }
            }
            // sine spacing makes the swept angle roughly equidistant across the cell
            // a cell of width h below r sweeps an angle of about 2√(2h/r) at equal radii
            let span = 2.0 * (2.0 * (r - prev) / r).sqrt();
            let q = ((span / ANGLE_STEP).ceil() as usize).clamp(INTERIOR_TAUS, 64);
            for l in 1..=q {
                let t = (0.5 * std::f64::consts::PI * l as f64 / (q + 1) as f64).sin();
                taus.push(prev + (r - prev) * t);
            }
            for l in 4..=APPROACH_TAUS {
                taus.push(r - (r - prev) * 0.25f64.powi(l));
            }
            member_of_radius[i] = taus.len();
            taus.push(r);
            prev = r;
        }
        let members: Vec<Member> = taus.par_iter().map(|&tau| member(m, grid, tau)).collect();
        if members.iter().any(|mb| mb.sweeps.iter().any(|s| !s.0.is_finite() || !s.1.is_finite())) {
            return Err(Error::Numerical("non-finite Clairaut integral in pair table".into()));
        }
        Ok(PairTable { radii: grid.to_vec(), members, member_of_radius })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// The curve `α ↦ d(r_i, r_j, α)` with `i ≤ j`, in increasing `α`.
    fn curve(&self, i: usize, j: usize) -> Vec<Sample> {
        let (ri, rj) = (self.radii[i], self.radii[j]);
        let top = self.member_of_radius[i];
        let mut out = Vec::with_capacity(2 * top + 4);
        if i != j {
            out.push(Sample { alpha: 0.0, length: rj - ri, slope: 0.0 });
            for mb in &self.members[..top] {
                let (fi, si) = mb.at(i);
                let (fj, sj) = mb.at(j);
                out.push(Sample { alpha: fj - fi, length: sj - si, slope: mb.clairaut });
            }
        }
        for mb in self.members[..=top].iter().rev() {
            let (fi, si) = mb.at(i);
            let (fj, sj) = mb.at(j);
            out.push(Sample { alpha: fi + fj, length: si + sj, slope: mb.clairaut });
        }
        out.push(Sample { alpha: std::f64::consts::PI, length: ri + rj, slope: 0.0 });
        out
    }

    /// Distances between grid radii `i` and `j` at each of the increasing `angles`.
    pub fn distances(&self, i: usize, j: usize, angles: &[f64], out: &mut [f64]) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if self.radii[i] == 0.0 {
            out.iter_mut().for_each(|d| *d = self.radii[j]);
            return;
        }
        let curve = self.curve(i, j);
        let mut p = 0;
        for (k, &alpha) in angles.iter().enumerate() {
            while p + 2 < curve.len() && curve[p + 1].alpha < alpha {
                p += 1;
            }
            let (a, b) = (curve[p], curve[p + 1]);
            let span = b.alpha - a.alpha;
            out[k] = if span <= 1e-14 {
                0.5 * (a.length + b.length)
            } else {
                let x = alpha.clamp(a.alpha, b.alpha);
                hermite(a.alpha, b.alpha, a.length, b.length, a.slope, b.slope, x)
            };
        }
    }

    /// `K_ij = Σ_k w_k·f(d(r_i, r_j, α_k))` for every kernel `f`, as dense symmetric matrices.
    pub fn kernels(&self, angles: &[f64], weights: &[f64], fs: &[&(dyn Fn(f64) -> f64 + Sync)]) -> Vec<Vec<f64>> {
        let n = self.radii.len();
        let rows: Vec<Vec<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut d = vec![0.0; angles.len()];
                let mut row = vec![vec![0.0; n - i]; fs.len()];
                for j in i..n {
                    self.distances(i, j, angles, &mut d);
                    for (q, f) in fs.iter().enumerate() {
                        let mut acc = 0.0;
                        for (dk, wk) in d.iter().zip(weights) {
                            acc += wk * f(*dk);
                        }
                        row[q][j - i] = acc;
                    }
                }
                row
            })
            .collect();
        let mut out = vec![vec![0.0; n * n]; fs.len()];
        for (i, row) in rows.into_iter().enumerate() {
            for (q, vals) in row.into_iter().enumerate() {
                for (off, v) in vals.into_iter().enumerate() {
                    let j = i + off;
                    out[q][i * n + j] = v;
                    out[q][j * n + i] = v;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::CurvatureProfile;
    use crate::geometry::{chord, hyperbolic_distance, DistanceMethod};
    use crate::quadrature::GaussLegendre;
    use crate::warp::WarpSolution;
    use std::f64::consts::PI;

    fn model(c: CurvatureProfile, r_max: f64) -> ModelManifold {
        ModelManifold::new(2, WarpSolution::solve_shared(&c, r_max).unwrap()).unwrap()
    }

    fn gl_angles(n: usize) -> Vec<f64> {
        GaussLegendre::new(n).mapped(0.0, PI).map(|(x, _)| x).collect()
    }

    #[test]
    fn matches_hyperbolic_law_of_cosines() {
        let m = model(CurvatureProfile::constant(1.0).unwrap(), 4.0);
        let grid: Vec<f64> = (0..=32).map(|i| i as f64 * 0.125).collect();
        let table = PairTable::new(&m, &grid).unwrap();
        let angles = gl_angles(64);
        let mut d = vec![0.0; angles.len()];
        let mut worst: f64 = 0.0;
        for i in 0..grid.len() {
            for j in i..grid.len() {
                table.distances(i, j, &angles, &mut d);
                for (k, &a) in angles.iter().enumerate() {
                    let e = hyperbolic_distance(1.0, grid[i], grid[j], a);
                    if e > 0.0 {
                        worst = worst.max((d[k] - e).abs() / e);
                    }
                }
            }
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn flat_limit_and_variable_curvature() {
        let m = model(CurvatureProfile::constant(1e-12).unwrap(), 3.0);
        let grid: Vec<f64> = (0..=12).map(|i| i as f64 * 0.25).collect();
        let table = PairTable::new(&m, &grid).unwrap();
        let angles = gl_angles(16);
        let mut d = vec![0.0; 16];
        table.distances(3, 9, &angles, &mut d);
        for (k, &a) in angles.iter().enumerate() {
            assert!((d[k] / chord(0.75, 2.25, a) - 1.0).abs() < 1e-6);
        }
        let m = model(CurvatureProfile::power_with_offset(2.0, 1.0, 1.0).unwrap(), 3.0);
        let table = PairTable::new(&m, &grid).unwrap();
        table.distances(2, 10, &angles, &mut d);
        for (k, &a) in angles.iter().enumerate() {
            let exact = m.distance(0.5, 2.5, a, DistanceMethod::BvpRefined).unwrap();
            assert!((d[k] / exact - 1.0).abs() < 1e-6, "{a}: {} vs {exact}", d[k]);
        }
    }

    #[test]
    fn kernel_matrix_is_symmetric() {
        let m = model(CurvatureProfile::constant(1.0).unwrap(), 2.0);
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
        let table = PairTable::new(&m, &grid).unwrap();
        let gl = GaussLegendre::new(8);
        let (a, w): (Vec<f64>, Vec<f64>) = gl.mapped(0.0, PI).unzip();
        let id = |d: f64| d;
        let k = table.kernels(&a, &w, &[&id]);
        let n = grid.len();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(k[0][i * n + j], k[0][j * n + i]);
            }
        }
        // the pole row is the radius itself times the total weight
        assert!((k[0][3] - 0.75 * PI).abs() < 1e-12);
    }
}
