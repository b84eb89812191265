//! Closed-form distance brackets.

/// Flat-space chord `√(r₁² + r₂² − 2r₁r₂ cos α)`, a lower bound on non-positively curved models.
pub fn chord(r1: f64, r2: f64, alpha: f64) -> f64 {
    // (r₁ − r₂)² + 4r₁r₂ sin²(α/2) avoids cancellation for small α
    let s = (0.5 * alpha).sin();
    ((r1 - r2).powi(2) + 4.0 * r1 * r2 * s * s).sqrt()
}

/// `|r₁ − r₂ cos α|`, the projection lower bound.
pub fn cosine_lower_bound(r1: f64, r2: f64, alpha: f64) -> f64 {
    (r1 - r2 * alpha.cos()).abs()
}

/// `log sinh x` for `x > 0`, without overflow.
fn log_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// Distance in the space form of curvature `−c` between points at distances
/// `r1`, `r2` from a base point with angle `alpha` between them.
///
/// Uses `cosh d = 1 + 2 sinh²((a−b)/2) + 2 sinh a sinh b sin²(α/2)` (with `a = √c·r₁`),
/// evaluated in log domain for large arguments.
pub fn hyperbolic_distance(c: f64, r1: f64, r2: f64, alpha: f64) -> f64 {
    let k = c.sqrt();
    let (a, b) = (k * r1, k * r2);
    let half = 0.5 * (a - b).abs();
    let s = (0.5 * alpha).sin();
    let t1 = if half > 0.0 { std::f64::consts::LN_2 + 2.0 * log_sinh(half) } else { f64::NEG_INFINITY };
    let t2 = if a > 0.0 && b > 0.0 && s > 0.0 {
        std::f64::consts::LN_2 + log_sinh(a) + log_sinh(b) + 2.0 * s.ln()
    } else {
        f64::NEG_INFINITY
    };
    let log_y = super::log_add(t1, t2);
    if log_y == f64::NEG_INFINITY {
        return 0.0;
    }
    let d = if log_y > 30.0 {
        // acosh(1 + y) = log(2y) + O(1/y)
        std::f64::consts::LN_2 + log_y + (1.0 / log_y.exp()).ln_1p()
    } else {
        let y = log_y.exp();
        (y + (y * (2.0 + y)).sqrt()).ln_1p()
    };
    d / k
}
