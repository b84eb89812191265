//! Quadrature rules shared by the geometry and energy code.

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut acc = 0.0;
        for (x, w) in self.mapped(a, b) {
            acc += w * f(x);
        }
        acc
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

// Kronrod 15 / Gauss 7 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = WGK[7] * fc;
    let mut rg = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    if a == b {
        return Integral { value: 0.0, error: 0.0, converged: true };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    for _ in 0..2000 {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Integral { value: total, error: err, converged: true };
        }
        // split the piece with the largest error
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (pa, pb, pv, pe) = pieces.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15(&mut f, pa, mid);
        let (v2, e2) = gk15(&mut f, mid, pb);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        pieces.push((pa, mid, v1, e1));
        pieces.push((mid, pb, v2, e2));
    }
    // recompute the sum cleanly
    let value = pairwise_sum(&pieces.iter().map(|p| p.2).collect::<Vec<_>>());
    let error: f64 = pieces.iter().map(|p| p.3).sum();
    Integral {
        value,
        error,
        converged: error <= abs_tol.max(rel_tol * value.abs()),
    }
}

fn gk15_pair<F: FnMut(f64) -> (f64, f64)>(f: &mut F, a: f64, b: f64) -> ([f64; 2], [f64; 2]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = [WGK[7] * fc.0, WGK[7] * fc.1];
    let mut rg = [WG[3] * fc.0, WG[3] * fc.1];
    for j in 0..7 {
        let dx = h * XGK[j];
        let (l, r) = (f(c - dx), f(c + dx));
        let s = [l.0 + r.0, l.1 + r.1];
        for q in 0..2 {
            rk[q] += WGK[j] * s[q];
            if j % 2 == 1 {
                rg[q] += WG[j / 2] * s[q];
            }
        }
    }
    ([rk[0] * h, rk[1] * h], [((rk[0] - rg[0]) * h).abs(), ((rk[1] - rg[1]) * h).abs()])
}

/// Adaptive Gauss–Kronrod integration of a pair of integrands sharing their evaluation points.
///
/// Each component must meet `rel_tol` relative to its own integral (or `abs_tol`).
pub fn adaptive_pair<F: FnMut(f64) -> (f64, f64)>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> [f64; 2] {
    if a == b {
        return [0.0, 0.0];
    }
    let (v, e) = gk15_pair(&mut f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    let score = |e: [f64; 2], t: [f64; 2]| {
        (e[0] / abs_tol.max(rel_tol * t[0].abs())).max(e[1] / abs_tol.max(rel_tol * t[1].abs()))
    };
    for _ in 0..2000 {
        if score(err, total) <= 1.0 {
            break;
        }
        let (idx, _) = pieces.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, p)| {
            let s = score(p.3, total);
            if s > acc.1 {
                (i, s)
            } else {
                acc
            }
        });
        let (pa, pb, pv, pe) = pieces.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15_pair(&mut f, pa, mid);
        let (v2, e2) = gk15_pair(&mut f, mid, pb);
        for q in 0..2 {
            total[q] += v1[q] + v2[q] - pv[q];
            err[q] += e1[q] + e2[q] - pe[q];
        }
        pieces.push((pa, mid, v1, e1));
        pieces.push((mid, pb, v2, e2));
    }
    let mut out = [0.0; 2];
    for (q, o) in out.iter_mut().enumerate() {
        *o = pairwise_sum(&pieces.iter().map(|p| p.2[q]).collect::<Vec<_>>());
    }
    out
}

/// Summation in a fixed binary tree order, independent of thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(8);
        // degree 15 polynomial
        let v = gl.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let s: f64 = gl.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_high_order() {
        let gl = GaussLegendre::new(64);
        let v = gl.integrate(0.0, PI, |x| x.sin());
        assert!((v - 2.0).abs() < 1e-14);
        assert!(gl.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = adaptive(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12, 1e-12);
        assert!((r.value - 2.0).abs() < 1e-9, "{:?}", r);
        let r = adaptive(|x| x.exp(), 0.0, 1.0, 1e-14, 1e-14);
        assert!((r.value - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), 249_750.0);
    }

    #[test]
    fn adaptive_pair_integrates_both_components() {
        let [a, b] = adaptive_pair(|x| (x.cos(), 1.0 / (1.0 + x * x)), 0.0, 3.0, 1e-300, 1e-13);
        assert!((a - 3f64.sin()).abs() < 1e-13);
        assert!((b - 3f64.atan()).abs() < 1e-13);
        assert_eq!(adaptive_pair(|x| (x, x), 1.0, 1.0, 1e-12, 1e-12), [0.0, 0.0]);
    }
}
