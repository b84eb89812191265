//! The comparison warp `ψ'' = c(θ)ψ, ψ(0) = 0, ψ'(0) = 1`, solved in log domain.
//!
//! The stored state is `H = log(ψ/θ)` and `u = H' = ψ'/ψ − 1/θ` on an adaptive
//! grid. `log ψ`, `Φ = ψ'/ψ` and `G = ψ/ψ'` are derived from them without ever
//! forming `ψ`, which overflows quickly for exponential curvature.

use std::sync::Arc;

use serde::Serialize;

use crate::curvature::{check_c32, dini_step, CurvatureProfile};
use crate::interp::{hermite, locate};
use crate::ode::{self, default_max_step, Form, Node, Settings};
use crate::quadrature::GaussLegendre;
use crate::verdict::{geometric_probe, CriterionVerdict, Verdict};
use crate::{Error, Result};

/// Series handoff point.
pub const THETA_INIT: f64 = 1e-4;
/// Default local error tolerance of the warp integrator.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Band around one accepted for the `√c·G → 1` limit.
pub const SQRT_CG_BAND: f64 = 0.05;
/// Relative shortfall tolerated in the linear growth rate of `H`.
pub const LINEAR_GROWTH_SLACK: f64 = 0.02;

/// Numerical solution of the warp IVP.
#[derive(Debug, Clone)]
pub struct WarpSolution {
    profile: CurvatureProfile,
    theta: Vec<f64>,
    h: Vec<f64>,
    u: Vec<f64>,
    theta_init: f64,
    /// Coefficients of `θ³` and `θ⁴` in the Taylor series of `ψ`.
    series_coeffs: [f64; 2],
}

/// Which structural properties of the solution hold at the grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WarpInvariants {
    /// `Φ·ψ = ψ' ≥ 1`.
    pub psi_prime_at_least_one: bool,
    /// `H` non-decreasing.
    pub h_non_decreasing: bool,
    /// `H` convex, i.e. `H'` non-decreasing up to round-off.
    pub h_convex: bool,
    /// `Φ > 0`.
    pub phi_positive: bool,
}

impl WarpInvariants {
    pub fn all(&self) -> bool {
        self.psi_prime_at_least_one && self.h_non_decreasing && self.h_convex && self.phi_positive
    }
}

/// One row of the tabulated warp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpRow {
    pub theta: f64,
    pub log_psi: f64,
    pub phi: f64,
    pub h: f64,
}

impl WarpSolution {
    /// Integrates the warp for `profile` on `[0, theta_max]`.
    pub fn solve(profile: &CurvatureProfile, theta_max: f64, tol: f64) -> Result<Self> {
        if !(theta_max > THETA_INIT) || !theta_max.is_finite() {
            return Err(Error::arg(format!("theta_max must exceed {THETA_INIT}, got {theta_max}")));
        }
        if !(tol > 1e-14 && tol < 1e-3) {
            return Err(Error::arg(format!("tol must lie in (1e-14, 1e-3), got {tol}")));
        }
        if theta_max > profile.domain_max() {
            return Err(Error::Range { what: "warp theta_max", value: theta_max, lo: 0.0, hi: profile.domain_max() });
        }
        let c0 = profile.at_pole();
        let dc0 = {
            let s = dini_step(0.0);
            (profile.at(s) - c0) / s
        };
        let series_coeffs = [c0 / 6.0, dc0 / 12.0];
        let t0 = THETA_INIT;
        let (h0, u0) = series(series_coeffs, t0);

        let mut theta = vec![t0];
        let mut hs = vec![h0];
        let mut us = vec![u0];
        ode::integrate(
            profile,
            Form::PoleRegularised,
            Node { theta: t0, u: u0, z: h0 },
            theta_max,
            Settings { tol, max_step: default_max_step },
            |n| {
                if !(n.u > -1e-9 * (1.0 + 1.0 / n.theta)) {
                    return Err(Error::Numerical(format!(
                        "psi'/psi dropped below 1/theta at theta = {} (u = {})",
                        n.theta, n.u
                    )));
                }
                theta.push(n.theta);
                hs.push(n.z);
                us.push(n.u.max(0.0));
                Ok(())
            },
        )?;
        Ok(WarpSolution { profile: profile.clone(), theta, h: hs, u: us, theta_init: t0, series_coeffs })
    }

    /// Convenience wrapper with the default tolerance, shared behind an `Arc`.
    pub fn solve_shared(profile: &CurvatureProfile, theta_max: f64) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::solve(profile, theta_max, DEFAULT_TOL)?))
    }

    pub fn profile(&self) -> &CurvatureProfile {
        &self.profile
    }

    pub fn theta_max(&self) -> f64 {
        *self.theta.last().unwrap()
    }

    pub fn theta_init(&self) -> f64 {
        self.theta_init
    }

    pub fn series_coeffs(&self) -> [f64; 2] {
        self.series_coeffs
    }

    /// Accepted integrator nodes.
    pub fn grid(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Row `i` of the table: `θ, log ψ, Φ, H`.
    pub fn row(&self, i: usize) -> WarpRow {
        let t = self.theta[i];
        WarpRow { theta: t, log_psi: self.h[i] + t.ln(), phi: self.u[i] + 1.0 / t, h: self.h[i] }
    }

    pub fn rows(&self) -> impl Iterator<Item = WarpRow> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    fn check_range(&self, theta: f64) -> Result<()> {
        if !(theta >= 0.0) || theta > self.theta_max() * (1.0 + 1e-14) {
            return Err(Error::Range { what: "warp abscissa", value: theta, lo: 0.0, hi: self.theta_max() });
        }
        Ok(())
    }

    /// Evaluates the structural invariants of the warp at every node.
    pub fn invariants(&self) -> WarpInvariants {
        let mut inv = WarpInvariants {
            psi_prime_at_least_one: true,
            h_non_decreasing: true,
            h_convex: true,
            phi_positive: true,
        };
        for i in 0..self.len() {
            let t = self.theta[i];
            // ψ' = Φψ = (1 + θu)·e^H
            let log_dpsi = (t * self.u[i]).ln_1p() + self.h[i];
            inv.psi_prime_at_least_one &= log_dpsi >= -1e-12;
            inv.phi_positive &= self.u[i] + 1.0 / t > 0.0;
            if i > 0 {
                inv.h_non_decreasing &= self.h[i] >= self.h[i - 1] - 1e-12 * (1.0 + self.h[i].abs());
                inv.h_convex &= self.u[i] >= self.u[i - 1] - 1e-8 * (1.0 + self.u[i].abs());
            }
        }
        inv
    }

    /// `(H, H')` at `theta`, assuming it is in range.
    #[inline]
    pub(crate) fn h_and_slope(&self, theta: f64) -> (f64, f64) {
        if theta <= self.theta_init {
            return series(self.series_coeffs, theta);
        }
        let x = theta.min(self.theta_max());
        let i = locate(&self.theta, x);
        let (t0, t1) = (self.theta[i], self.theta[i + 1]);
        let h = hermite(t0, t1, self.h[i], self.h[i + 1], self.u[i], self.u[i + 1], x);
        let du0 = ode::rhs(Form::PoleRegularised, self.profile.at(t0), t0, self.u[i]);
        let du1 = ode::rhs(Form::PoleRegularised, self.profile.at(t1), t1, self.u[i + 1]);
        let u = hermite(t0, t1, self.u[i], self.u[i + 1], du0, du1, x);
        (h, u.max(0.0))
    }

    /// `log ψ(θ)` for abscissae already known to be in range.
    #[inline]
    pub(crate) fn lp(&self, theta: f64) -> f64 {
        self.h_and_slope(theta).0 + theta.ln()
    }

    /// `H(θ) = log(ψ(θ)/θ)`.
    pub fn eval_h(&self, theta: f64) -> Result<f64> {
        self.check_range(theta)?;
        Ok(self.h_and_slope(theta).0)
    }

    /// `H'(θ) = ψ'/ψ − 1/θ`.
    pub fn eval_h_prime(&self, theta: f64) -> Result<f64> {
        self.check_range(theta)?;
        Ok(self.h_and_slope(theta).1)
    }

    /// `log ψ(θ)`; `−∞` at the pole.
    pub fn log_psi(&self, theta: f64) -> Result<f64> {
        self.check_range(theta)?;
        Ok(self.h_and_slope(theta).0 + theta.ln())
    }

    /// `Φ(θ) = ψ'/ψ`.
    pub fn eval_phi(&self, theta: f64) -> Result<f64> {
        self.check_range(theta)?;
        Ok(self.h_and_slope(theta).1 + 1.0 / theta)
    }

    /// `G(θ) = ψ/ψ' = θ/(1 + θH')`.
    pub fn eval_g(&self, theta: f64) -> Result<f64> {
        self.check_range(theta)?;
        let u = self.h_and_slope(theta).1;
        Ok(theta / (1.0 + theta * u))
    }

    /// `∫_a^b √c` by Gauss–Legendre on the solution grid.
    pub(crate) fn sqrt_c_cumulative(&self, from: f64) -> Vec<(f64, f64)> {
        let gl = GaussLegendre::new(6);
        let mut out = Vec::new();
        let mut acc = 0.0;
        let mut prev = from;
        for &t in self.theta.iter().filter(|&&t| t > from) {
            acc += gl.integrate(prev, t, |x| self.profile.at(x).sqrt());
            out.push((t, acc));
            prev = t;
        }
        out
    }

    fn c32_probe(&self) -> Vec<f64> {
        geometric_probe(self.theta_max() / 512.0, 10)
    }

    /// Log-domain check of the exponential envelopes of `ψ` beyond `theta0`.
    ///
    /// The lower envelope is attempted only if the profile passes the
    /// `3/2`-growth probe, since it is only guaranteed under that condition.
    pub fn check_envelopes(&self, eps: f64, theta0: f64, want_lower: bool) -> Result<CriterionVerdict> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::arg("epsilon must lie in (0, 1)"));
        }
        if theta0 < self.theta_init || theta0 >= self.theta_max() {
            return Err(Error::Range { what: "envelope start", value: theta0, lo: self.theta_init, hi: self.theta_max() });
        }
        let mut out = CriterionVerdict::new("psi_envelopes");
        let mut notes = Vec::new();
        let lower_allowed = want_lower && check_c32(&self.profile, &self.c32_probe())?.is_satisfied();
        if want_lower && !lower_allowed {
            notes.push("lower envelope skipped: c32 condition not satisfied".to_string());
        }
        let base = self.log_psi(theta0)?;
        for (t, integral) in self.sqrt_c_cumulative(theta0) {
            let growth = self.log_psi(t)? - base;
            let slack = 1e-9 * (1.0 + growth.abs());
            out.probes.push((t, growth));
            if growth > (1.0 + eps) * integral + slack {
                return Ok(out.with(Verdict::Violated, t, format!("upper envelope fails at theta = {t}")));
            }
            if lower_allowed && growth < (1.0 - eps) * integral - slack {
                return Ok(out.with(Verdict::Violated, t, format!("lower envelope fails at theta = {t}")));
            }
        }
        notes.insert(0, if lower_allowed { "both envelopes hold" } else { "upper envelope holds" }.into());
        Ok(out.with(Verdict::Satisfied, theta0, notes.join("; ")))
    }

    /// Smallest candidate `θ₀` from which both envelopes hold.
    pub fn scan_envelope_start(&self, eps: f64, candidates: &[f64]) -> Result<Option<f64>> {
        for &t0 in candidates {
            if t0 >= self.theta_max() {
                break;
            }
            if self.check_envelopes(eps, t0, true)?.is_satisfied() {
                return Ok(Some(t0));
            }
        }
        Ok(None)
    }

    /// Checks `√c(θ)·G(θ) ∈ [0.95, 1.05]` on the last decade of the grid.
    pub fn check_sqrtcg_limit(&self) -> Result<CriterionVerdict> {
        let mut out = CriterionVerdict::new("sqrt_c_G_limit");
        let lo = self.theta_max() / 10.0;
        let mut worst: f64 = 0.0;
        let mut last_dev = 0.0;
        for (i, &t) in self.theta.iter().enumerate().filter(|(_, &t)| t >= lo) {
            let log_g = t.ln() - (1.0 + t * self.u[i]).ln();
            let val = (0.5 * self.profile.log_eval(t)? + log_g).exp();
            out.probes.push((t, val));
            last_dev = (val - 1.0).abs();
            worst = worst.max(last_dev);
        }
        let hyp = check_c32(&self.profile, &self.c32_probe())?.is_satisfied();
        let mut note = if hyp {
            String::new()
        } else {
            "c32 not satisfied: only the liminf half is guaranteed".to_string()
        };
        let verdict = if worst < SQRT_CG_BAND {
            Verdict::Satisfied
        } else if last_dev < SQRT_CG_BAND {
            note = format!("enters the band late; {note}");
            Verdict::Inconclusive
        } else {
            Verdict::Violated
        };
        Ok(out.with(verdict, worst, note))
    }

    /// Checks `liminf H(θ)/θ ≥ √c(0)` on the last decade of the grid.
    ///
    /// `H(θ)/θ` converges to its limit only like `log θ/θ`, so the rate is
    /// measured against the constant-curvature comparison warp with `c ≡ c(0)`:
    /// the effective rate is `√c(0) + (H(θ) − H₀(θ))/θ`, where `H₀` is that
    /// comparison's `H`, which the solution dominates.
    pub fn check_linear_growth(&self) -> Result<CriterionVerdict> {
        let c0 = self.profile.at_pole();
        let a = c0.sqrt();
        if a > 0.0 && self.theta_max() < 20.0 / a {
            return Err(Error::arg(format!("theta_max must be at least 20/sqrt(c(0)) = {}", 20.0 / a)));
        }
        let mut out = CriterionVerdict::new("linear_growth_of_H");
        let lo = self.theta_max() / 10.0;
        let mut worst = f64::INFINITY;
        for (i, &t) in self.theta.iter().enumerate().filter(|(_, &t)| t >= lo) {
            let h0 = if a > 0.0 { log_sinhc(a * t) } else { 0.0 };
            let rate = a + (self.h[i] - h0) / t;
            out.probes.push((t, self.h[i] / t));
            worst = worst.min(rate);
        }
        let threshold = a * (1.0 - LINEAR_GROWTH_SLACK);
        let verdict = if worst >= threshold { Verdict::Satisfied } else { Verdict::Violated };
        Ok(out.with(verdict, worst, format!("threshold {threshold}")))
    }
}

/// `log(sinh x / x)` without overflow.
pub fn log_sinhc(x: f64) -> f64 {
    if x < 1e-4 {
        x * x / 6.0
    } else if x < 20.0 {
        (x.sinh() / x).ln()
    } else {
        x - std::f64::consts::LN_2 - x.ln() + (-(-2.0 * x).exp()).ln_1p()
    }
}

/// `(H, H')` from the two-term series of `ψ`.
fn series(coeffs: [f64; 2], theta: f64) -> (f64, f64) {
    let [a3, a4] = coeffs;
    let t = theta;
    let q = a3 * t * t + a4 * t * t * t;
    let h = q.ln_1p();
    let u = (2.0 * a3 * t + 3.0 * a4 * t * t) / (1.0 + q);
    (h, u)
}

/// Integrates `Ψ' = (n−1)c − Ψ²/(n−1)` from `Ψ(eps) = psi_eps`, returning the accepted samples.
///
/// Every sample must stay positive; a non-positive value is reported as a solver fault.
pub fn solve_riccati_psi(
    profile: &CurvatureProfile,
    n: usize,
    eps: f64,
    psi_eps: f64,
    theta_max: f64,
) -> Result<Vec<(f64, f64)>> {
    if n < 2 {
        return Err(Error::arg("dimension must be at least 2"));
    }
    if !(psi_eps > 0.0) || !(eps > 0.0) || !(theta_max > eps) {
        return Err(Error::arg("need psi_eps > 0 and 0 < eps < theta_max"));
    }
    let m = (n - 1) as f64;
    let mut out = vec![(eps, psi_eps)];
    ode::integrate(
        profile,
        Form::Plain,
        Node { theta: eps, u: psi_eps / m, z: 0.0 },
        theta_max,
        Settings { tol: 1e-10, max_step: |_, _| 0.05 },
        |node| {
            let v = m * node.u;
            if !(v > 0.0) {
                return Err(Error::Consistency(format!("Riccati sample {v} <= 0 at t = {}", node.theta)));
            }
            out.push((node.theta, v));
            Ok(())
        },
    )?;
    Ok(out)
}

/// Verifies `(n−1)·log ψ_M ≤ (n−1)·log ψ ≤ (n−1)·log ψ_m` on a uniform grid of `nodes` points.
pub fn sandwich_check(
    c_upper: &CurvatureProfile,
    c: &CurvatureProfile,
    c_lower: &CurvatureProfile,
    n: usize,
    theta_max: f64,
    nodes: usize,
    slack: f64,
) -> Result<CriterionVerdict> {
    if n < 2 || nodes < 2 {
        return Err(Error::arg("need n >= 2 and at least two nodes"));
    }
    let grid: Vec<f64> = (1..=nodes).map(|i| theta_max * i as f64 / nodes as f64).collect();
    for &t in std::iter::once(&0.0).chain(grid.iter()) {
        let (a, b, d) = (c_upper.eval(t)?, c.eval(t)?, c_lower.eval(t)?);
        if a > b * (1.0 + 1e-12) || b > d * (1.0 + 1e-12) {
            return Err(Error::arg(format!("curvature bounds not ordered at theta = {t}: {a} <= {b} <= {d} fails")));
        }
    }
    let w_upper = WarpSolution::solve(c_upper, theta_max, DEFAULT_TOL)?;
    let w = WarpSolution::solve(c, theta_max, DEFAULT_TOL)?;
    let w_lower = WarpSolution::solve(c_lower, theta_max, DEFAULT_TOL)?;
    let m = (n - 1) as f64;
    let mut out = CriterionVerdict::new("det_A_sandwich");
    let mut worst = f64::INFINITY;
    for &t in &grid {
        let lo = m * w_upper.log_psi(t)?;
        let mid = m * w.log_psi(t)?;
        let hi = m * w_lower.log_psi(t)?;
        let margin = (mid - lo).min(hi - mid);
        worst = worst.min(margin);
        out.probes.push((t, margin));
        if margin < -slack * (1.0 + mid.abs()) {
            return Ok(out.with(Verdict::Violated, margin, format!("sandwich fails at theta = {t}")));
        }
    }
    Ok(out.with(Verdict::Satisfied, worst, "smallest log-domain margin"))
}
