//! Fast marching for `T_r² + T_φ²/ψ(r)² = 1` on a uniform polar grid.
//!
//! The grid covers `[0, r_max] × [0, π]`; reflection at `φ = 0` and `φ = π`
//! encodes the symmetry of the field about the source meridian. The pole row
//! is a single point and is fixed to the exact distance `r₁`. A block of
//! nodes around the source is seeded with exact geodesic distances, which
//! removes the point-source singularity that spoils upwind schemes there.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::clairaut::geodesic_distance;
use super::{hyperbolic_distance, DistanceMethod, ModelManifold};
use crate::output::fmt_g17;
use crate::{Error, Result};

/// Half-width, in cells, of the block around the source seeded with exact distances.
const SEED_CELLS: isize = 6;

/// Grid resolution and extent of a distance field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of radial nodes, including `r = 0` and `r = r_max`.
    pub nr: usize,
    /// Number of angular nodes, including `φ = 0` and `φ = π`.
    pub nphi: usize,
    pub r_max: f64,
    /// Also solve on the half-resolution grid to estimate the discretisation error.
    pub estimate_error: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nr: 513, nphi: 513, r_max: 0.0, estimate_error: true }
    }
}

/// Geodesic distances from `(r₁, φ = 0)` on a polar grid.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub source_radius: f64,
    pub nr: usize,
    pub nphi: usize,
    pub dr: f64,
    pub dphi: f64,
    pub method: DistanceMethod,
    /// Largest relative difference to the half-resolution solve (0 when not computed).
    pub error_estimate: f64,
    /// Row-major by radius: `values[i * nphi + j]` is the distance to `(i·dr, j·dφ)`.
    pub values: Vec<f64>,
    brackets: Brackets,
}

/// Curvature scale for the upper bracket at query time.
#[derive(Debug, Clone, Copy)]
struct Brackets {
    c_star: f64,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on the distance, ties broken by index for determinism
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Far,
    Trial,
    Known,
}

fn solve(m: &ModelManifold, r1: f64, nr: usize, nphi: usize, r_max: f64) -> Vec<f64> {
    let dr = r_max / (nr - 1) as f64;
    let dphi = PI / (nphi - 1) as f64;
    let idx = |i: usize, j: usize| i * nphi + j;
    let mut t = vec![f64::INFINITY; nr * nphi];
    if r1 == 0.0 {
        for i in 0..nr {
            for j in 0..nphi {
                t[idx(i, j)] = i as f64 * dr;
            }
        }
        return t;
    }
    let psi: Vec<f64> = (0..nr).map(|i| m.warp().lp(i as f64 * dr).exp()).collect();
    let mut state = vec![State::Far; nr * nphi];
    let mut heap = BinaryHeap::new();
    // seeded values are exact and must not be lowered by upwind updates
    let mut fixed = vec![false; nr * nphi];

    for j in 0..nphi {
        t[idx(0, j)] = r1;
        state[idx(0, j)] = State::Known;
    }
    // seed a block of nodes around the source with exact geodesic distances
    let i1 = (r1 / dr).round() as isize;
    for i in (i1 - SEED_CELLS).max(1)..=(i1 + SEED_CELLS).min(nr as isize - 1) {
        let r = i as f64 * dr;
        for j in 0..=(SEED_CELLS as usize).min(nphi - 1) {
            let d = geodesic_distance(m, r1, r, j as f64 * dphi).unwrap_or(f64::INFINITY);
            let k = idx(i as usize, j);
            t[k] = d;
            fixed[k] = true;
            state[k] = State::Trial;
            heap.push(Entry(d, k));
        }
    }

    let neighbour_phi = |j: isize| -> usize {
        // reflect across φ = 0 and φ = π
        let last = nphi as isize - 1;
        let jj = if j < 0 { -j } else if j > last { 2 * last - j } else { j };
        jj as usize
    };

    while let Some(Entry(v, k)) = heap.pop() {
        if state[k] == State::Known || v > t[k] {
            continue;
        }
        state[k] = State::Known;
        let (i, j) = (k / nphi, k % nphi);
        let mut nbrs: Vec<(usize, usize)> = Vec::with_capacity(4);
        if i + 1 < nr {
            nbrs.push((i + 1, j));
        }
        if i > 1 {
            nbrs.push((i - 1, j));
        }
        for dj in [-1isize, 1] {
            nbrs.push((i, neighbour_phi(j as isize + dj)));
        }
        for (ni, nj) in nbrs {
            let nk = idx(ni, nj);
            if state[nk] == State::Known || fixed[nk] {
                continue;
            }
            let cand = update(&t, &state, ni, nj, nr, nphi, dr, psi[ni] * dphi, &neighbour_phi);
            if cand < t[nk] {
                t[nk] = cand;
                state[nk] = State::Trial;
                heap.push(Entry(cand, nk));
            }
        }
    }
    t
}

/// Upwind update at `(i, j)` from known neighbours, second order where two known nodes line up.
#[allow(clippy::too_many_arguments)]
fn update(
    t: &[f64],
    state: &[State],
    i: usize,
    j: usize,
    nr: usize,
    nphi: usize,
    dr: f64,
    h_phi: f64,
    reflect: &dyn Fn(isize) -> usize,
) -> f64 {
    let known = |a: usize, b: usize| state[a * nphi + b] == State::Known;
    let val = |a: usize, b: usize| t[a * nphi + b];
    // each direction contributes (s/h)²(T − a)²
    let mut terms: Vec<(f64, f64)> = Vec::with_capacity(2);

    let mut best_r: Option<(f64, (f64, f64))> = None;
    for dir in [-1isize, 1] {
        let i1 = i as isize + dir;
        if i1 < 0 || i1 >= nr as isize || !known(i1 as usize, j) {
            continue;
        }
        let t1 = val(i1 as usize, j);
        let i2 = i as isize + 2 * dir;
        let cand = if i2 >= 1 && i2 < nr as isize && known(i2 as usize, j) && val(i2 as usize, j) <= t1 {
            let t2 = val(i2 as usize, j);
            ((4.0 * t1 - t2) / 3.0, 1.5 / dr)
        } else {
            (t1, 1.0 / dr)
        };
        if best_r.is_none_or(|b| t1 < b.0) {
            best_r = Some((t1, cand));
        }
    }
    if let Some((_, b)) = best_r {
        terms.push(b);
    }

    let mut best_p: Option<(f64, (f64, f64))> = None;
    for dir in [-1isize, 1] {
        let j1 = reflect(j as isize + dir);
        if !known(i, j1) {
            continue;
        }
        let t1 = val(i, j1);
        let j2 = reflect(j as isize + 2 * dir);
        let cand = if known(i, j2) && val(i, j2) <= t1 && j2 != j {
            let t2 = val(i, j2);
            ((4.0 * t1 - t2) / 3.0, 1.5 / h_phi)
        } else {
            (t1, 1.0 / h_phi)
        };
        if best_p.is_none_or(|b| t1 < b.0) {
            best_p = Some((t1, cand));
        }
    }
    if let Some((_, b)) = best_p {
        terms.push(b);
    }

    // one-sided fallbacks (always valid upper estimates)
    let one_sided = terms.iter().map(|&(a, s)| a + 1.0 / s).fold(f64::INFINITY, f64::min);
    if terms.len() == 2 {
        let (a1, s1) = terms[0];
        let (a2, s2) = terms[1];
        let (w1, w2) = (s1 * s1, s2 * s2);
        // w1(T−a1)² + w2(T−a2)² = 1
        let qa = w1 + w2;
        let qb = -2.0 * (w1 * a1 + w2 * a2);
        let qc = w1 * a1 * a1 + w2 * a2 * a2 - 1.0;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let root = (-qb + disc.sqrt()) / (2.0 * qa);
            if root >= a1.max(a2) {
                return root.min(one_sided);
            }
        }
    }
    one_sided
}

impl DistanceField {
    pub(crate) fn compute(m: &ModelManifold, r1: f64, spec: GridSpec) -> Result<Self> {
        if spec.nr < 5 || spec.nphi < 5 {
            return Err(Error::arg("distance field needs at least 5x5 nodes"));
        }
        if !(spec.r_max > 0.0) || r1 > spec.r_max {
            return Err(Error::arg("grid must cover the source radius"));
        }
        let values = solve(m, r1, spec.nr, spec.nphi, spec.r_max);
        let dr = spec.r_max / (spec.nr - 1) as f64;
        let dphi = PI / (spec.nphi - 1) as f64;
        let mut error_estimate = 0.0;
        if spec.estimate_error && (spec.nr - 1).is_multiple_of(2) && (spec.nphi - 1).is_multiple_of(2) {
            let (cr, cp) = ((spec.nr - 1) / 2 + 1, (spec.nphi - 1) / 2 + 1);
            let coarse = solve(m, r1, cr, cp, spec.r_max);
            let floor = 4.0 * dr.max(m.warp().lp(r1).exp() * dphi);
            for i in 0..cr {
                for j in 0..cp {
                    let f = values[2 * i * spec.nphi + 2 * j];
                    if f > floor {
                        error_estimate = f64::max(error_estimate, (f - coarse[i * cp + j]).abs() / f);
                    }
                }
            }
        }
        Ok(DistanceField {
            source_radius: r1,
            nr: spec.nr,
            nphi: spec.nphi,
            dr,
            dphi,
            method: DistanceMethod::FastMarch,
            error_estimate,
            values,
            brackets: Brackets { c_star: m.warp().profile().max_on(spec.r_max) },
        })
    }

    pub fn r_max(&self) -> f64 {
        self.dr * (self.nr - 1) as f64
    }

    /// Value at grid node `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nphi + j]
    }

    /// Bilinear interpolation at `(r, α)`, checked against the distance brackets.
    pub fn query(&self, r: f64, alpha: f64) -> Result<f64> {
        if !(r >= 0.0 && r <= self.r_max() * (1.0 + 1e-12)) {
            return Err(Error::Range { what: "field radius", value: r, lo: 0.0, hi: self.r_max() });
        }
        if !(0.0..=PI).contains(&alpha) {
            return Err(Error::Range { what: "field angle", value: alpha, lo: 0.0, hi: PI });
        }
        let x = (r / self.dr).min((self.nr - 1) as f64);
        let y = (alpha / self.dphi).min((self.nphi - 1) as f64);
        let i = (x.floor() as usize).min(self.nr - 2);
        let j = (y.floor() as usize).min(self.nphi - 2);
        let (fx, fy) = (x - i as f64, y - j as f64);
        let v = (1.0 - fx) * ((1.0 - fy) * self.at(i, j) + fy * self.at(i, j + 1))
            + fx * ((1.0 - fy) * self.at(i + 1, j) + fy * self.at(i + 1, j + 1));
        let r1 = self.source_radius;
        let lower = super::chord(r1, r, alpha).max(super::cosine_lower_bound(r1, r, alpha));
        let upper = if self.brackets.c_star > 1e-300 {
            hyperbolic_distance(self.brackets.c_star, r1, r, alpha)
        } else {
            lower
        };
        // first-order marching leaves an O(dr) defect near the source even where the
        // coarse-grid estimate is small or absent
        let slack = (3.0 * self.error_estimate).max(1e-9) * v.max(self.dr) + 4.0 * self.dr;
        if v < lower - slack || v > upper + slack {
            return Err(Error::Resolution(format!(
                "field value {v} outside bracket [{lower}, {upper}] at (r = {r}, alpha = {alpha})"
            )));
        }
        Ok(v.clamp(lower, upper.max(lower)))
    }

    /// Writes the field as CSV preceded by a commented header with the grid metadata.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# r1={},nr={},nphi={},dr={},dphi={},method=fast_march,error_estimate={}",
            fmt_g17(self.source_radius),
            self.nr,
            self.nphi,
            fmt_g17(self.dr),
            fmt_g17(self.dphi),
            fmt_g17(self.error_estimate)
        )?;
        writeln!(w, "r,phi,distance")?;
        for i in 0..self.nr {
            for j in 0..self.nphi {
                writeln!(
                    w,
                    "{},{},{}",
                    fmt_g17(i as f64 * self.dr),
                    fmt_g17(j as f64 * self.dphi),
                    fmt_g17(self.at(i, j))
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::CurvatureProfile;
    use crate::warp::WarpSolution;

    fn model() -> ModelManifold {
        let w = WarpSolution::solve_shared(&CurvatureProfile::constant(1.0).unwrap(), 4.0).unwrap();
        ModelManifold::new(2, w).unwrap()
    }

    #[test]
    fn source_and_radial_values() {
        let m = model();
        let spec = GridSpec { nr: 129, nphi: 129, r_max: 3.0, estimate_error: false };
        let f = m.distance_field(1.5, spec).unwrap();
        assert!(f.query(1.5, 0.0).unwrap().abs() < 1e-12);
        for r in [0.0, 0.75, 2.25, 3.0] {
            let v = f.query(r, 0.0).unwrap();
            assert!((v - (r - 1.5f64).abs()).abs() < 0.02, "{r}: {v}");
        }
        assert!(f.values.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn hyperbolic_field_within_two_percent_at_256() {
        let m = model();
        let spec = GridSpec { nr: 257, nphi: 257, r_max: 3.0, estimate_error: true };
        let f = m.distance_field(1.0, spec).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..spec.nr {
            for j in 0..spec.nphi {
                let (r, a) = (i as f64 * f.dr, j as f64 * f.dphi);
                let exact = hyperbolic_distance(1.0, 1.0, r, a);
                if exact > 0.0 {
                    worst = worst.max((f.at(i, j) - exact).abs() / exact);
                }
            }
        }
        assert!(worst < 0.01, "{worst}");
        assert!(f.error_estimate > 0.0 && f.error_estimate < 0.05);
    }

    #[test]
    fn pole_source_is_radial() {
        let m = model();
        let f = m.distance_field(0.0, GridSpec { nr: 33, nphi: 33, r_max: 2.0, estimate_error: false }).unwrap();
        assert!((f.query(1.3, 2.0).unwrap() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn csv_header() {
        let m = model();
        let f = m.distance_field(0.5, GridSpec { nr: 5, nphi: 5, r_max: 1.0, estimate_error: false }).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# r1=0.5,nr=5,nphi=5,dr=0.25,"));
        assert_eq!(s.lines().count(), 2 + 25);
    }
}
