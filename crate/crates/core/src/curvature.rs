//! Curvature bound profiles `c(θ)` and probes of their growth conditions.
//!
//! A profile bounds the sectional curvature of the manifold at distance `θ`
//! from the pole by `-c(θ)`. All profiles here are radial.

use serde::{Deserialize, Serialize};

use crate::interp::{pchip_eval, pchip_slopes};
use crate::verdict::{check_increasing, CriterionVerdict, Verdict};
use crate::{Error, Result};

/// Tolerance below which the ratio `D̄c / c^{3/2}` counts as having vanished.
pub const C32_RATIO_TOL: f64 = 1e-2;
/// Relative change over the last three probes below which a sequence counts as settled.
pub const TREND_REL_CHANGE: f64 = 1e-3;

/// Tabulated profile with monotone cubic interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRaw", into = "TabulatedRaw")]
pub struct Tabulated {
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TabulatedRaw {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<TabulatedRaw> for Tabulated {
    type Error = Error;
    fn try_from(raw: TabulatedRaw) -> Result<Self> {
        Tabulated::new(raw.nodes, raw.values)
    }
}

impl From<Tabulated> for TabulatedRaw {
    fn from(t: Tabulated) -> Self {
        TabulatedRaw { nodes: t.nodes, values: t.values }
    }
}

impl Tabulated {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::arg("tabulated profile needs >= 2 nodes and matching values"));
        }
        if nodes[0] < 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::arg("tabulated nodes must be non-negative and strictly increasing"));
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::arg("tabulated curvature values must be positive and finite"));
        }
        let slopes = pchip_slopes(&nodes, &values);
        Ok(Tabulated { nodes, values, slopes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn eval(&self, theta: f64) -> Result<f64> {
        let (lo, hi) = (self.nodes[0], *self.nodes.last().unwrap());
        if theta < lo || theta > hi {
            return Err(Error::Range { what: "tabulated curvature", value: theta, lo, hi });
        }
        Ok(pchip_eval(&self.nodes, &self.values, &self.slopes, theta))
    }
}

/// Curvature bound profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurvatureProfile {
    /// `c(θ) = c0`.
    Constant { c0: f64 },
    /// `c(θ) = offset + scale·θ^k`.
    Power { k: f64, scale: f64, #[serde(default)] offset: f64 },
    /// `c(θ) = scale·e^{βθ}`.
    Exponential { beta: f64, scale: f64 },
    Tabulated(Tabulated),
}

impl CurvatureProfile {
    pub fn constant(c0: f64) -> Result<Self> {
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::arg(format!("constant curvature must be positive, got {c0}")));
        }
        Ok(CurvatureProfile::Constant { c0 })
    }

    /// `scale·θ^k`; vanishes at the pole when there is no offset.
    pub fn power(k: f64, scale: f64) -> Result<Self> {
        Self::power_with_offset(k, scale, 0.0)
    }

    pub fn power_with_offset(k: f64, scale: f64, offset: f64) -> Result<Self> {
        if !(k >= 1.0) || !(scale > 0.0) || !(offset >= 0.0) {
            return Err(Error::arg(format!(
                "power profile needs k >= 1, scale > 0, offset >= 0 (got k={k}, scale={scale}, offset={offset})"
            )));
        }
        Ok(CurvatureProfile::Power { k, scale, offset })
    }

    pub fn exponential(beta: f64, scale: f64) -> Result<Self> {
        if !(beta > 0.0) || !(scale > 0.0) {
            return Err(Error::arg("exponential profile needs beta > 0 and scale > 0"));
        }
        Ok(CurvatureProfile::Exponential { beta, scale })
    }

    pub fn tabulated(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(CurvatureProfile::Tabulated(Tabulated::new(nodes, values)?))
    }

    /// Checks the parameters of a profile built without the constructors (e.g. from a config file).
    pub fn validate(&self) -> Result<()> {
        match self {
            CurvatureProfile::Constant { c0 } => Self::constant(*c0).map(|_| ()),
            CurvatureProfile::Power { k, scale, offset } => Self::power_with_offset(*k, *scale, *offset).map(|_| ()),
            CurvatureProfile::Exponential { beta, scale } => Self::exponential(*beta, *scale).map(|_| ()),
            CurvatureProfile::Tabulated(_) => Ok(()),
        }
    }

    /// Largest abscissa the profile can be evaluated at.
    pub fn domain_max(&self) -> f64 {
        match self {
            CurvatureProfile::Tabulated(t) => *t.nodes.last().unwrap(),
            _ => f64::INFINITY,
        }
    }

    fn domain_min(&self) -> f64 {
        match self {
            CurvatureProfile::Tabulated(t) => t.nodes[0],
            _ => 0.0,
        }
    }

    /// `c(θ)`.
    pub fn eval(&self, theta: f64) -> Result<f64> {
        if !(theta >= 0.0) {
            return Err(Error::Range { what: "curvature abscissa", value: theta, lo: 0.0, hi: f64::INFINITY });
        }
        Ok(match self {
            CurvatureProfile::Constant { c0 } => *c0,
            CurvatureProfile::Power { k, scale, offset } => offset + scale * theta.powf(*k),
            CurvatureProfile::Exponential { beta, scale } => scale * (beta * theta).exp(),
            CurvatureProfile::Tabulated(t) => t.eval(theta)?,
        })
    }

    /// `log c(θ)`, finite even where `c` itself overflows.
    pub fn log_eval(&self, theta: f64) -> Result<f64> {
        match self {
            CurvatureProfile::Exponential { beta, scale } if theta >= 0.0 => Ok(scale.ln() + beta * theta),
            _ => Ok(self.eval(theta)?.ln()),
        }
    }

    /// Evaluation for callers that already validated the abscissa.
    #[inline]
    pub(crate) fn at(&self, theta: f64) -> f64 {
        match self {
            CurvatureProfile::Constant { c0 } => *c0,
            CurvatureProfile::Power { k, scale, offset } => {
                let t = theta.max(0.0);
                if *k == 2.0 {
                    offset + scale * t * t
                } else if *k == 1.0 {
                    offset + scale * t
                } else {
                    offset + scale * t.powf(*k)
                }
            }
            CurvatureProfile::Exponential { beta, scale } => scale * (beta * theta).exp(),
            CurvatureProfile::Tabulated(t) => {
                let x = theta.clamp(t.nodes[0], *t.nodes.last().unwrap());
                pchip_eval(&t.nodes, &t.values, &t.slopes, x)
            }
        }
    }

    /// Closed-form profiles are non-decreasing by construction; tables are checked node by node.
    pub fn is_non_decreasing(&self) -> bool {
        match self {
            CurvatureProfile::Tabulated(t) => t.values.windows(2).all(|w| w[1] >= w[0]),
            _ => true,
        }
    }

    /// `c̃(θ) = max_{0 ≤ t ≤ θ} c(t)`.
    ///
    /// Only tables can decrease. Their monotone interpolant never exceeds the
    /// larger neighbouring node value, so the running maximum of the node values
    /// is the running maximum of the interpolant at every node.
    pub fn running_max(&self) -> CurvatureProfile {
        match self {
            CurvatureProfile::Tabulated(t) if !self.is_non_decreasing() => {
                let mut acc = f64::NEG_INFINITY;
                let values: Vec<f64> = t
                    .values
                    .iter()
                    .map(|&v| {
                        acc = acc.max(v);
                        acc
                    })
                    .collect();
                CurvatureProfile::Tabulated(
                    Tabulated::new(t.nodes.clone(), values).expect("running max keeps a valid table"),
                )
            }
            _ => self.clone(),
        }
    }

    /// `max_{0 ≤ t ≤ θ} c(t)`, clamped to the domain of tables.
    pub fn max_on(&self, theta: f64) -> f64 {
        match self {
            CurvatureProfile::Tabulated(t) => {
                let x = theta.clamp(t.nodes[0], *t.nodes.last().unwrap());
                t.nodes
                    .iter()
                    .zip(&t.values)
                    .take_while(|(n, _)| **n <= x)
                    .fold(self.at(x), |m, (_, v)| m.max(*v))
            }
            _ => self.at(theta),
        }
    }

    /// Value at the pole, used for the series start of the warp.
    pub fn at_pole(&self) -> f64 {
        self.at(self.domain_min())
    }

    /// One-sided finite difference estimates of the lower and upper Dini derivatives at `theta`.
    pub fn dini_derivatives(&self, theta: f64) -> Result<(f64, f64)> {
        let h = dini_step(theta);
        let c = self.eval(theta)?;
        let mut slopes = Vec::with_capacity(2);
        if theta + h <= self.domain_max() {
            slopes.push((self.eval(theta + h)? - c) / h);
        }
        if theta - h >= self.domain_min() {
            slopes.push((c - self.eval(theta - h)?) / h);
        }
        if slopes.is_empty() {
            return Err(Error::arg("profile domain too short for a difference quotient"));
        }
        let lower = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
        let upper = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok((lower, upper))
    }
}

/// Difference step for Dini derivative estimates.
pub fn dini_step(theta: f64) -> f64 {
    1e-6f64.max(1e-6 * theta)
}

/// Probes the growth condition `D̄c/c^{3/2} → 0` together with `D̲c > 0`.
pub fn check_c32(profile: &CurvatureProfile, probe: &[f64]) -> Result<CriterionVerdict> {
    check_increasing(probe)?;
    if probe[0] > 0.0 && probe.last().unwrap() / probe[0] < 100.0 {
        return Err(Error::arg("probe must span at least two decades"));
    }
    let mut out = CriterionVerdict::new("c32");
    let mut notes = Vec::new();
    for &theta in probe {
        if theta > profile.domain_max() {
            notes.push(format!("probe truncated at theta={theta} (profile domain)"));
            break;
        }
        let c = profile.eval(theta)?;
        if !c.is_finite() {
            notes.push(format!("probe truncated at theta={theta} (c overflows)"));
            break;
        }
        let (lower, upper) = profile.dini_derivatives(theta)?;
        if !(lower > 0.0) {
            return Ok(out.with(
                Verdict::Violated,
                lower,
                format!("lower Dini derivative {lower:e} is not positive at theta={theta}"),
            ));
        }
        let ratio = upper / c / c.sqrt();
        out.probes.push((theta, ratio));
    }
    if out.probes.len() < 3 {
        let note = format!("fewer than three usable probes; {}", notes.join("; "));
        return Ok(out.with(Verdict::Inconclusive, f64::NAN, note));
    }
    let k = out.probes.len();
    let last: Vec<f64> = out.probes[k - 3..].iter().map(|p| p.1).collect();
    let fin = last[2];
    let non_increasing = last[1] <= last[0] && last[2] <= last[1];
    let settled = ((last[2] - last[1]).abs() / last[1].abs().max(f64::MIN_POSITIVE) < TREND_REL_CHANGE)
        && ((last[1] - last[0]).abs() / last[0].abs().max(f64::MIN_POSITIVE) < TREND_REL_CHANGE);
    let (verdict, msg) = if non_increasing && fin < C32_RATIO_TOL {
        (Verdict::Satisfied, "ratio decreases below tolerance")
    } else if settled && fin >= C32_RATIO_TOL {
        (Verdict::Violated, "ratio settles at a positive limit")
    } else {
        (Verdict::Inconclusive, "ratio trend undecided on this probe")
    };
    notes.insert(0, msg.to_string());
    Ok(out.with(verdict, fin, notes.join("; ")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verdict::geometric_probe;

    #[test]
    fn eval_examples() {
        assert_eq!(CurvatureProfile::constant(1.0).unwrap().eval(5.0).unwrap(), 1.0);
        assert_eq!(CurvatureProfile::power(2.0, 1.0).unwrap().eval(3.0).unwrap(), 9.0);
        let e = CurvatureProfile::exponential(1.0, 1.0).unwrap().eval(2.0).unwrap();
        assert!((e - 7.389_056_098_930_65).abs() < 1e-12);
    }

    #[test]
    fn tabulated_range_error() {
        let t = CurvatureProfile::tabulated(vec![0.0, 1.0, 2.0], vec![2.0, 1.0, 3.0]).unwrap();
        assert!(matches!(t.eval(2.5), Err(Error::Range { .. })));
        assert!(t.eval(-0.1).is_err());
        assert!((t.eval(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(CurvatureProfile::constant(0.0).is_err());
        assert!(CurvatureProfile::power(0.5, 1.0).is_err());
        assert!(CurvatureProfile::tabulated(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(CurvatureProfile::tabulated(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn running_max_examples() {
        let t = CurvatureProfile::tabulated(vec![0.0, 1.0, 2.0], vec![2.0, 1.0, 3.0]).unwrap();
        match t.running_max() {
            CurvatureProfile::Tabulated(r) => assert_eq!(r.values(), &[2.0, 2.0, 3.0]),
            _ => unreachable!(),
        }
        let p = CurvatureProfile::power(2.0, 1.0).unwrap();
        assert_eq!(p.running_max(), p);
    }

    #[test]
    fn c32_examples() {
        let probe = geometric_probe(1.0, 11); // 1 .. 1024
        let v = check_c32(&CurvatureProfile::power(2.0, 1.0).unwrap(), &probe).unwrap();
        assert_eq!(v.verdict, Verdict::Satisfied, "{v:?}");
        let v = check_c32(&CurvatureProfile::constant(1.0).unwrap(), &probe).unwrap();
        assert_eq!(v.verdict, Verdict::Violated);
        let probe = geometric_probe(0.5, 10); // 0.5 .. 256
        let v = check_c32(&CurvatureProfile::exponential(1.0, 1.0).unwrap(), &probe).unwrap();
        assert_eq!(v.verdict, Verdict::Satisfied, "{v:?}");
        // e^{-θ/2} at the last probe
        assert!((v.trend / (-128.0f64).exp() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn c32_power_family() {
        let probe = geometric_probe(1.0, 10);
        for k in [1.0, 2.0, 4.0] {
            let v = check_c32(&CurvatureProfile::power(k, 1.0).unwrap(), &probe).unwrap();
            assert_eq!(v.verdict, Verdict::Satisfied, "k={k}: {v:?}");
        }
    }

    #[test]
    fn c32_rejects_bad_probe() {
        let p = CurvatureProfile::constant(1.0).unwrap();
        assert!(check_c32(&p, &[1.0, 0.5, 2.0]).is_err());
        assert!(check_c32(&p, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn eval_is_deterministic() {
        let p = CurvatureProfile::tabulated(vec![0.0, 0.7, 1.9, 3.0], vec![1.0, 4.0, 2.0, 5.0]).unwrap();
        for i in 0..100 {
            let x = i as f64 * 0.03;
            assert_eq!(p.eval(x).unwrap().to_bits(), p.eval(x).unwrap().to_bits());
        }
    }
}
