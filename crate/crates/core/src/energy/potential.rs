//! Interaction potentials `h(θ)` and their convex minorants.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Radial profile of an interaction potential or of a convex minorant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `h ≡ 0`.
    Zero,
    /// `a·θ^p`.
    Power { a: f64, p: f64 },
    /// `a·(e^{bθ} − 1)`.
    ExpGrowth { a: f64, b: f64 },
    /// `a·log(1 + θ)`.
    LogPlus { a: f64 },
    /// Piecewise-linear through the nodes, continued linearly with the last slope.
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

/// Sample points used to verify monotonicity, convexity and domination.
fn samples() -> Vec<f64> {
    let mut xs: Vec<f64> = (0..=512).map(|i| 64.0 * i as f64 / 512.0).collect();
    xs.extend((1..=40).map(|j| 64.0 * 1.25f64.powi(j)));
    xs
}

impl PotentialKind {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64, name: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::arg(format!("potential parameter {name} must be positive, got {x}")))
            }
        };
        match self {
            PotentialKind::Zero => Ok(()),
            PotentialKind::Power { a, p } => positive(*a, "a").and(positive(*p, "p")),
            PotentialKind::ExpGrowth { a, b } => positive(*a, "a").and(positive(*b, "b")),
            PotentialKind::LogPlus { a } => positive(*a, "a"),
            PotentialKind::Tabulated { nodes, values } => {
                if nodes.len() < 2 || nodes.len() != values.len() {
                    return Err(Error::arg("tabulated potential needs >= 2 nodes and matching values"));
                }
                if nodes[0] != 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::arg("tabulated potential nodes must start at 0 and increase strictly"));
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::arg("tabulated potential values must be finite and non-negative"));
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::arg("tabulated potential must be non-decreasing"));
                }
                Ok(())
            }
        }
    }

    /// `h(θ)` for `θ ≥ 0`.
    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            PotentialKind::Zero => 0.0,
            PotentialKind::Power { a, p } => a * theta.powf(*p),
            PotentialKind::ExpGrowth { a, b } => a * (b * theta).exp_m1(),
            PotentialKind::LogPlus { a } => a * theta.ln_1p(),
            PotentialKind::Tabulated { nodes, values } => {
                let last = nodes.len() - 1;
                let k = crate::interp::locate(nodes, theta.clamp(nodes[0], nodes[last])).min(last - 1);
                let slope = (values[k + 1] - values[k]) / (nodes[k + 1] - nodes[k]);
                values[k] + slope * (theta.max(nodes[0]) - nodes[k])
            }
        }
    }

    /// `log h(θ)` without overflow for the exponential family.
    pub fn log_eval(&self, theta: f64) -> f64 {
        match self {
            PotentialKind::Power { a, p } => a.ln() + p * theta.ln(),
            PotentialKind::ExpGrowth { a, b } => {
                let x = b * theta;
                // log(e^x − 1) = x + log(1 − e^{−x})
                a.ln() + if x > 1.0 { x + (-(-x).exp()).ln_1p() } else { x.exp_m1().ln() }
            }
            PotentialKind::LogPlus { a } => a.ln() + theta.ln_1p().ln(),
            _ => self.eval(theta).ln(),
        }
    }

    /// Convexity, exact for closed forms and by second differences for tables.
    pub fn is_convex(&self) -> bool {
        match self {
            PotentialKind::Zero | PotentialKind::ExpGrowth { .. } => true,
            PotentialKind::Power { p, .. } => *p >= 1.0,
            PotentialKind::LogPlus { .. } => false,
            PotentialKind::Tabulated { nodes, values } => nodes.windows(3).zip(values.windows(3)).all(|(x, y)| {
                let s0 = (y[1] - y[0]) / (x[1] - x[0]);
                let s1 = (y[2] - y[1]) / (x[2] - x[1]);
                s1 >= s0 - 1e-12 * s0.abs().max(1.0)
            }),
        }
    }
}

/// Interaction potential with an optional convex minorant `φ ≤ h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionPotential {
    pub h: PotentialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minorant: Option<PotentialKind>,
}

impl InteractionPotential {
    pub fn new(h: PotentialKind) -> Result<Self> {
        let p = InteractionPotential { h, minorant: None };
        p.validate()?;
        Ok(p)
    }

    pub fn zero() -> Self {
        InteractionPotential { h: PotentialKind::Zero, minorant: None }
    }

    pub fn power(a: f64, p: f64) -> Result<Self> {
        Self::new(PotentialKind::Power { a, p })
    }

    pub fn with_minorant(mut self, phi: PotentialKind) -> Result<Self> {
        self.minorant = Some(phi);
        self.validate()?;
        Ok(self)
    }

    /// Checks the parameters, `h(0) ≥ 0`, monotonicity of `h`, and for a minorant its convexity and `φ ≤ h`.
    pub fn validate(&self) -> Result<()> {
        self.h.validate()?;
        let xs = samples();
        if self.h.eval(0.0) < 0.0 {
            return Err(Error::arg("interaction potential must satisfy h(0) >= 0"));
        }
        if xs.windows(2).any(|w| self.h.eval(w[1]) < self.h.eval(w[0])) {
            return Err(Error::arg("interaction potential must be non-decreasing"));
        }
        if let Some(phi) = &self.minorant {
            phi.validate()?;
            if !phi.is_convex() {
                return Err(Error::arg("minorant must be convex"));
            }
            if let Some(x) = xs.iter().find(|&&x| phi.eval(x) > self.h.eval(x) * (1.0 + 1e-12)) {
                return Err(Error::arg(format!("minorant exceeds the potential at theta = {x}")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.h.eval(theta)
    }

    /// The declared minorant, or `h` itself when it is convex.
    pub fn convex_minorant(&self) -> Result<&PotentialKind> {
        match &self.minorant {
            Some(phi) => Ok(phi),
            None if self.h.is_convex() => Ok(&self.h),
            None => Err(Error::arg("potential is not convex and carries no convex minorant")),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.h == PotentialKind::Zero
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(PotentialKind::Power { a: 2.0, p: 3.0 }.eval(2.0), 16.0);
        assert!((PotentialKind::ExpGrowth { a: 1.0, b: 1.0 }.eval(1.0) - (1f64.exp() - 1.0)).abs() < 1e-15);
        assert!((PotentialKind::LogPlus { a: 2.0 }.eval(1.0) - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(PotentialKind::Zero.eval(5.0), 0.0);
    }

    #[test]
    fn log_eval_matches_and_survives_overflow() {
        for k in [
            PotentialKind::Power { a: 2.0, p: 1.5 },
            PotentialKind::ExpGrowth { a: 0.5, b: 0.3 },
            PotentialKind::LogPlus { a: 3.0 },
        ] {
            for x in [0.01, 0.5, 3.0, 40.0] {
                assert!((k.log_eval(x) - k.eval(x).ln()).abs() < 1e-12, "{k:?} {x}");
            }
        }
        let e = PotentialKind::ExpGrowth { a: 1.0, b: 1.0 };
        assert!((e.log_eval(5000.0) - 5000.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_extrapolates_linearly() {
        let t = PotentialKind::Tabulated { nodes: vec![0.0, 1.0, 2.0], values: vec![0.0, 1.0, 3.0] };
        assert!(t.validate().is_ok());
        assert_eq!(t.eval(0.5), 0.5);
        assert_eq!(t.eval(1.5), 2.0);
        assert_eq!(t.eval(4.0), 7.0);
        assert!(t.is_convex());
    }

    #[test]
    fn minorant_rules() {
        let h = InteractionPotential::power(1.0, 3.0).unwrap();
        assert_eq!(h.convex_minorant().unwrap(), &h.h);
        let log = InteractionPotential::new(PotentialKind::LogPlus { a: 1.0 }).unwrap();
        assert!(log.convex_minorant().is_err());
        // θ ≥ log(1+θ) so a linear minorant of a log potential is rejected
        assert!(log.clone().with_minorant(PotentialKind::Power { a: 1.0, p: 1.0 }).is_err());
        assert!(log.with_minorant(PotentialKind::Zero).is_ok());
        assert!(InteractionPotential::power(1.0, 1.5)
            .unwrap()
            .with_minorant(PotentialKind::LogPlus { a: 1.0 })
            .is_err());
    }

    #[test]
    fn rejects_invalid() {
        assert!(InteractionPotential::power(-1.0, 2.0).is_err());
        assert!(InteractionPotential::new(PotentialKind::Tabulated { nodes: vec![0.0, 1.0], values: vec![1.0, 0.5] }).is_err());
        assert!(InteractionPotential::new(PotentialKind::ExpGrowth { a: 1.0, b: 0.0 }).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let h = InteractionPotential::power(1.0, 3.0).unwrap().with_minorant(PotentialKind::Power { a: 0.5, p: 2.0 });
        // 0.5θ² ≤ θ³ fails near the origin
        assert!(h.is_err());
        let h = InteractionPotential::new(PotentialKind::ExpGrowth { a: 1.0, b: 0.5 }).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, r#"{"h":{"kind":"exp_growth","a":1.0,"b":0.5}}"#);
        assert_eq!(serde_json::from_str::<InteractionPotential>(&s).unwrap(), h);
    }
}
