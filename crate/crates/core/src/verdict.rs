use serde::{Deserialize, Serialize};
use std::fmt;

/// Outcome of a numerically probed asymptotic condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// A condition evaluated along a probe sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub condition_id: String,
    /// `(abscissa, value)` pairs the decision was based on.
    pub probes: Vec<(f64, f64)>,
    /// Fitted slope or last-window statistic.
    pub trend: f64,
    pub verdict: Verdict,
    pub note: String,
}

impl CriterionVerdict {
    pub fn new(condition_id: impl Into<String>) -> Self {
        CriterionVerdict {
            condition_id: condition_id.into(),
            probes: Vec::new(),
            trend: 0.0,
            verdict: Verdict::Inconclusive,
            note: String::new(),
        }
    }

    pub fn with(mut self, verdict: Verdict, trend: f64, note: impl Into<String>) -> Self {
        self.verdict = verdict;
        self.trend = trend;
        self.note = note.into();
        self
    }

    pub fn is_satisfied(&self) -> bool {
        self.verdict == Verdict::Satisfied
    }
}

/// Geometric probe `theta0 * 2^j` for `j = 0..count`.
pub fn geometric_probe(theta0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| theta0 * 2f64.powi(j as i32)).collect()
}

pub(crate) fn check_increasing(probe: &[f64]) -> crate::Result<()> {
    if probe.len() < 2 || probe.windows(2).any(|w| !(w[1] > w[0])) || probe[0] < 0.0 {
        return Err(crate::Error::arg(
            "probe must be a strictly increasing sequence of non-negative reals with at least two entries",
        ));
    }
    Ok(())
}
