//! Existence and nonexistence criteria for ground states, the uniform-ball
//! spreading experiment, and a ground-state search by damped Gibbs iteration.

use std::io::{self, Write};

use serde::Serialize;

use crate::curvature::{check_c32, CurvatureProfile};
use crate::densities::{uniform_grid, RadialDensity};
use crate::energy::{EnergyBreakdown, EnergyEvaluator, InteractionPotential, PairQuadrature, PotentialKind};
use crate::geometry::ModelManifold;
use crate::output::write_csv;
use crate::quadrature::{adaptive, pairwise_sum};
use crate::verdict::{check_increasing, geometric_probe, CriterionVerdict, Verdict};
use crate::warp::WarpSolution;
use crate::{Error, Result};

/// `g` must fall below minus this value at the last probe to predict nonexistence.
pub const NONEXISTENCE_FLOOR: f64 = 1e3;
/// Growth factor a ratio must reach over the last two decades of the probe.
pub const GROWTH_FACTOR: f64 = 10.0;
/// Growth factor at or below which a ratio counts as bounded.
pub const BOUNDED_FACTOR: f64 = 2.0;
/// Default `δ` of the nonexistence condition.
pub const DEFAULT_DELTA: f64 = 1.0;
/// Boundary mass above which a ground-state search reports spreading.
pub const SPREADING_MASS: f64 = 1e-2;
/// Boundary mass a converged ground state may carry.
pub const CONVERGED_BOUNDARY_MASS: f64 = 1e-4;
/// Fraction of the radial grid counted as its boundary layer.
pub const BOUNDARY_FRACTION: f64 = 0.05;
/// Mass defect defining the support radius.
pub const SUPPORT_MASS_DEFECT: f64 = 1e-6;
/// Log-density drop below the peak beyond which nodes leave the effective support.
const SUPPORT_LOG_DROP: f64 = 69.0;

/// Default `A = (n − 1)/2` of the nonexistence condition.
pub fn default_a(n: usize) -> f64 {
    0.5 * (n - 1) as f64
}

/// Default probe for the criteria, `1, 2, 4, …, 512`.
pub fn default_probe() -> Vec<f64> {
    geometric_probe(1.0, 10)
}

/// Least-squares slope of `(x, y)` over the last `window` points.
fn window_slope(points: &[(f64, f64)], window: usize) -> f64 {
    let pts = &points[points.len().saturating_sub(window)..];
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Nonexistence condition: `g(θ) = h(θ) − A∫₀^{θ−δ}√(c_M(t/2)) dt → −∞`.
pub fn check_nonexistence(
    h: &InteractionPotential,
    c_upper: &CurvatureProfile,
    n: usize,
    a: f64,
    delta: f64,
    probe: &[f64],
) -> Result<CriterionVerdict> {
    if n < 2 {
        return Err(Error::arg("dimension must be at least 2"));
    }
    if !(a > 0.0 && a < (n - 1) as f64) {
        return Err(Error::arg(format!("A must lie in (0, n - 1) = (0, {}), got {a}", n - 1)));
    }
    if !(delta > 0.0) {
        return Err(Error::arg("delta must be positive"));
    }
    check_increasing(probe)?;
    let c32 = check_c32(c_upper, &geometric_probe(1.0, 12))?;
    if c32.verdict == Verdict::Violated {
        return Err(Error::arg(format!("upper curvature bound violates the c^(3/2) hypothesis: {}", c32.note)));
    }
    let mut out = CriterionVerdict::new("nonexistence");
    let mut integral = 0.0;
    let mut upper = 0.0;
    let mut notes = vec![format!("A = {a}, delta = {delta}, c32 {}", c32.verdict)];
    for &theta in probe {
        let target = (theta - delta).max(0.0);
        if 0.5 * target > c_upper.domain_max() {
            notes.push(format!("probe truncated at theta = {theta} (curvature domain)"));
            break;
        }
        if target > upper {
            integral += adaptive(|t| c_upper.at(0.5 * t).sqrt(), upper, target, 0.0, 1e-12).value;
            upper = target;
        }
        let g = h.eval(theta) - a * integral;
        if !g.is_finite() {
            notes.push(format!("probe truncated at theta = {theta} (overflow)"));
            break;
        }
        out.probes.push((theta, g));
    }
    if out.probes.len() < 3 {
        return Ok(out.with(Verdict::Inconclusive, f64::NAN, "fewer than three usable probes"));
    }
    let slope = window_slope(&out.probes, 3);
    let last = out.probes.last().unwrap().1;
    let verdict = if slope < 0.0 && last < -NONEXISTENCE_FLOOR {
        Verdict::Satisfied
    } else if slope > 0.0 && last > NONEXISTENCE_FLOOR {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    notes.insert(0, format!("g = {last:.6e} at the last probe, last-window slope {slope:.6e}"));
    Ok(out.with(verdict, slope, notes.join("; ")))
}

/// Verdict on a sequence of `log` ratios: sustained growth, boundedness, or undecided.
fn growth_verdict(mut out: CriterionVerdict, log_ratios: &[(f64, f64)], mut notes: Vec<String>) -> CriterionVerdict {
    out.probes = log_ratios.iter().map(|&(t, l)| (t, l.exp())).collect();
    if log_ratios.len() < 3 {
        notes.insert(0, "fewer than three usable probes".into());
        return out.with(Verdict::Inconclusive, f64::NAN, notes.join("; "));
    }
    let (t_last, l_last) = *log_ratios.last().unwrap();
    let Some(two) = log_ratios.iter().rev().find(|p| p.0 <= t_last / 100.0 * (1.0 + 1e-12)) else {
        notes.insert(0, "probe spans less than two decades".into());
        return out.with(Verdict::Inconclusive, f64::NAN, notes.join("; "));
    };
    let last_decade: Vec<f64> = log_ratios.iter().filter(|p| p.0 >= t_last / 10.0 * (1.0 - 1e-12)).map(|p| p.1).collect();
    let monotone = last_decade.windows(2).all(|w| w[1] >= w[0]);
    let growth = l_last - two.1;
    let verdict = if monotone && growth >= GROWTH_FACTOR.ln() {
        Verdict::Satisfied
    } else if growth <= BOUNDED_FACTOR.ln() {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    notes.insert(
        0,
        format!(
            "ratio grows by a factor {:.6e} over the last two decades (monotone on the last decade: {monotone})",
            growth.exp()
        ),
    );
    out.with(verdict, growth.exp(), notes.join("; "))
}

/// Existence condition: `φ(θ)/(θ√c̃_m(θ)) → ∞` for a convex minorant `φ` and the running maximum `c̃_m`.
pub fn check_existence(h: &InteractionPotential, c_lower: &CurvatureProfile, n: usize, probe: &[f64]) -> Result<CriterionVerdict> {
    if n < 2 {
        return Err(Error::arg("dimension must be at least 2"));
    }
    check_increasing(probe)?;
    let phi = h.convex_minorant()?;
    let mut notes = Vec::new();
    let c = if c_lower.is_non_decreasing() {
        c_lower.clone()
    } else {
        notes.push("running maximum of c_m used".to_string());
        c_lower.running_max()
    };
    let mut logs = Vec::new();
    for &theta in probe.iter().filter(|t| **t > 0.0) {
        if theta > c.domain_max() {
            notes.push(format!("probe truncated at theta = {theta} (curvature domain)"));
            break;
        }
        let l = phi.log_eval(theta) - theta.ln() - 0.5 * c.log_eval(theta)?;
        if l.is_nan() {
            return Err(Error::Numerical(format!("existence ratio undefined at theta = {theta}")));
        }
        logs.push((theta, l));
    }
    Ok(growth_verdict(CriterionVerdict::new("existence"), &logs, notes))
}

/// Relaxed existence condition: `φ(θ)/H_m(θ) → ∞` with `H_m = log(ψ_m/θ)`.
///
/// Whenever [`check_existence`] holds for `φ` and the profile of `warp`, this
/// condition must hold as well; a contradiction is reported as a consistency error.
pub fn check_relaxed_existence(phi: &PotentialKind, warp: &WarpSolution, probe: &[f64]) -> Result<CriterionVerdict> {
    check_increasing(probe)?;
    if !phi.is_convex() {
        return Err(Error::arg("relaxed existence needs a convex minorant"));
    }
    let mut notes = Vec::new();
    let mut logs = Vec::new();
    for &theta in probe.iter().filter(|t| **t > 0.0) {
        if theta > warp.theta_max() {
            notes.push(format!("probe truncated at theta = {theta} (warp range)"));
            break;
        }
        let hm = warp.eval_h(theta)?;
        if !(hm > 0.0) {
            continue;
        }
        logs.push((theta, phi.log_eval(theta) - hm.ln()));
    }
    let relaxed = growth_verdict(CriterionVerdict::new("relaxed_existence"), &logs, notes);
    let used: Vec<f64> = relaxed.probes.iter().map(|p| p.0).collect();
    if used.len() >= 2 {
        let strong = InteractionPotential { h: phi.clone(), minorant: None };
        let classic = check_existence(&strong, warp.profile(), 2, &used)?;
        if classic.is_satisfied() && !relaxed.is_satisfied() {
            return Err(Error::Consistency(format!(
                "existence condition holds but the weaker relaxed condition does not: {}",
                relaxed.note
            )));
        }
    }
    Ok(relaxed)
}

/// One radius of the spreading experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadRow {
    pub radius: f64,
    pub energy: EnergyBreakdown,
    /// `−log|B_R(o)| + h(2R)/2`.
    pub analytic_bound: f64,
}

/// Radial grid with about `nodes` uniform nodes on `[0, max R]` and a node at every scheduled radius.
pub fn schedule_grid(schedule: &[f64], nodes: usize) -> Result<Vec<f64>> {
    check_increasing(schedule)?;
    if schedule[0] <= 0.0 {
        return Err(Error::arg("schedule radii must be positive"));
    }
    let r_max = *schedule.last().unwrap();
    let mut grid = uniform_grid(r_max, nodes.max(3));
    let min_gap = 0.25 * r_max / (nodes.max(3) - 1) as f64;
    for &r in schedule {
        if grid.iter().all(|g| (g - r).abs() > min_gap) {
            grid.push(r);
        } else {
            // move the nearest node onto the radius
            let k = grid.iter().enumerate().min_by(|a, b| (a.1 - r).abs().total_cmp(&(b.1 - r).abs())).unwrap().0;
            grid[k] = r;
        }
    }
    grid.sort_by(f64::total_cmp);
    Ok(grid)
}

/// Free energies of the uniform balls `ρ_R` along an increasing schedule of radii.
pub fn spreading_experiment(
    m: &ModelManifold,
    h: &InteractionPotential,
    schedule: &[f64],
    nodes: usize,
) -> Result<Vec<SpreadRow>> {
    let grid = schedule_grid(schedule, nodes)?;
    if *grid.last().unwrap() > m.r_max() {
        return Err(Error::Range { what: "schedule radius", value: *grid.last().unwrap(), lo: 0.0, hi: m.r_max() });
    }
    let pq = PairQuadrature::new(m, &grid)?;
    spreading_with(&pq, m, h, schedule)
}

/// [`spreading_experiment`] on a prebuilt pair quadrature whose grid contains every scheduled radius.
pub fn spreading_with(
    pq: &PairQuadrature,
    m: &ModelManifold,
    h: &InteractionPotential,
    schedule: &[f64],
) -> Result<Vec<SpreadRow>> {
    let ev = EnergyEvaluator::from_pairs(pq, h)?;
    let grid = pq.grid();
    schedule
        .iter()
        .map(|&r| {
            let last = grid
                .iter()
                .position(|g| *g == r)
                .ok_or_else(|| Error::State(format!("radius {r} is not a node of the pair grid")))?;
            let rho = RadialDensity::uniform_ball_on(m, grid, last)?;
            let energy = ev.free_energy(&rho)?;
            let analytic_bound = -m.ball_volume(r)?.log_volume + 0.5 * h.eval(2.0 * r);
            Ok(SpreadRow { radius: r, energy, analytic_bound })
        })
        .collect()
}

/// Nonexistence regime when the energies decrease strictly over the last half of the schedule.
pub fn spreading_verdict(rows: &[SpreadRow]) -> CriterionVerdict {
    let mut out = CriterionVerdict::new("spreading");
    out.probes = rows.iter().map(|r| (r.radius, r.energy.total)).collect();
    if rows.len() < 3 {
        return out.with(Verdict::Inconclusive, f64::NAN, "fewer than three radii");
    }
    let tail = &out.probes[rows.len() / 2..];
    let decreasing = tail.windows(2).all(|w| w[1].1 < w[0].1);
    let increasing_end = out.probes[rows.len() - 1].1 > out.probes[rows.len() - 2].1;
    let slope = window_slope(&out.probes, 3);
    if decreasing {
        out.with(Verdict::Satisfied, slope, "energies decrease strictly over the last half of the schedule")
    } else if increasing_end {
        out.with(Verdict::Violated, slope, "energies increase at the end of the schedule")
    } else {
        out.with(Verdict::Inconclusive, slope, "energies not monotone over the last half of the schedule")
    }
}

/// Writes `R, entropy, interaction, total, analytic_bound`.
pub fn write_spread_csv<W: Write>(w: W, rows: &[SpreadRow]) -> io::Result<()> {
    write_csv(
        w,
        &["R", "entropy", "interaction", "total", "analytic_bound"],
        rows.iter().map(|r| vec![r.radius, r.energy.entropy, r.energy.interaction, r.energy.total, r.analytic_bound]),
    )
}

/// Settings of the damped Gibbs iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundStateOptions {
    /// Outer radius of the radial grid.
    pub r_max: f64,
    pub nodes: usize,
    /// Damping `η ∈ (0, 1]`.
    pub damping: f64,
    pub max_iter: usize,
    /// Tolerance on the sup-norm of the log-residual.
    pub tol: f64,
}

impl GroundStateOptions {
    pub fn new(r_max: f64) -> Self {
        GroundStateOptions { r_max, nodes: 129, damping: 0.3, max_iter: 2000, tol: 1e-8 }
    }
}

/// Outcome of a ground-state search.
#[derive(Debug, Clone, Serialize)]
pub struct GroundStateReport {
    #[serde(skip)]
    pub density: RadialDensity,
    pub energy: EnergyBreakdown,
    pub converged: bool,
    pub iterations: usize,
    /// Final sup-norm of `log ρ + h∗ρ − const` over the effective support.
    pub residual: f64,
    /// Smallest grid radius with cumulative mass at least `1 − 1e-6`.
    pub support_radius: f64,
    /// Mass in the outer 5% of the grid.
    pub boundary_mass: f64,
    /// Mass escaping to the grid boundary above the spreading threshold.
    pub spreading: bool,
    /// `E[ρ_{t+1}] ≤ E[ρ_t] + 1e-8` held along the iteration.
    pub energy_monotone: bool,
    pub energy_history: Vec<f64>,
}

/// Sup-norm of `log ρ + h∗ρ − const` over nodes within [`SUPPORT_LOG_DROP`] of the peak, with the best constant.
fn log_residual(log_rho: &[f64], conv: &[f64]) -> f64 {
    let peak = log_rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = log_rho
        .iter()
        .zip(conv)
        .filter(|(l, _)| **l >= peak - SUPPORT_LOG_DROP)
        .map(|(l, c)| l + c)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    0.5 * (hi - lo)
}

/// Shifts log-values so that `Σ e^{l_i + w_i} = 1`.
fn normalize_logs(mut logs: Vec<f64>, log_w: &[f64]) -> Vec<f64> {
    let peak = logs.iter().zip(log_w).map(|(l, w)| l + w).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().zip(log_w).map(|(l, w)| (l + w - peak).exp()).sum();
    let shift = peak + sum.ln();
    logs.iter_mut().for_each(|l| *l -= shift);
    logs
}

/// Searches a radial ground state of `E` by the damped fixed point `ρ ← ρ^{1−η} e^{−η h∗ρ}`, renormalized.
pub fn find_ground_state(m: &ModelManifold, h: &InteractionPotential, opts: GroundStateOptions) -> Result<GroundStateReport> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::arg("damping must lie in (0, 1]"));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::arg("tolerance and iteration budget must be positive"));
    }
    if !(opts.r_max > 0.0) || opts.r_max > m.r_max() {
        return Err(Error::Range { what: "ground-state grid radius", value: opts.r_max, lo: 0.0, hi: m.r_max() });
    }
    let grid = uniform_grid(opts.r_max, opts.nodes.max(5));
    let ev = EnergyEvaluator::new(m, &grid, h)?;
    ground_state_with(&ev, m, opts)
}

/// [`find_ground_state`] reusing an evaluator built on the search grid.
pub fn ground_state_with(ev: &EnergyEvaluator, m: &ModelManifold, opts: GroundStateOptions) -> Result<GroundStateReport> {
    let grid = ev.grid().to_vec();
    let log_w = m.log_hat_weights(&grid)?;
    let h = ev.potential();
    let eta = opts.damping;
    // start from the Gibbs state of the potential seen from the pole
    let mut log_rho = normalize_logs(grid.iter().map(|&r| -h.eval(r)).collect(), &log_w);
    let mut rho = RadialDensity::with_weights(m, grid.clone(), log_w.clone(), &log_rho)?;
    let mut history = Vec::new();
    let mut monotone = true;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..=opts.max_iter {
        let conv = ev.convolution(&rho)?;
        if conv.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("interaction potential overflows on the search grid".into()));
        }
        let energy = crate::energy::entropy(&rho)
            + 0.5 * pairwise_sum(&rho.masses().iter().zip(&conv).map(|(m, c)| m * c).collect::<Vec<_>>());
        if let Some(prev) = history.last() {
            if energy > prev + 1e-8 {
                monotone = false;
            }
        }
        history.push(energy);
        residual = log_residual(&log_rho, &conv);
        iterations = it;
        if residual <= opts.tol || it == opts.max_iter {
            break;
        }
        let next: Vec<f64> = log_rho.iter().zip(&conv).map(|(l, c)| (1.0 - eta) * l - eta * c).collect();
        log_rho = normalize_logs(next, &log_w);
        if log_rho.iter().any(|v| v.is_nan()) {
            return Err(Error::Numerical("ground-state iterate is not finite".into()));
        }
        rho = RadialDensity::with_weights(m, grid.clone(), log_w.clone(), &log_rho)?;
    }
    let energy = ev.free_energy(&rho)?;
    let boundary_mass = rho.outer_mass(BOUNDARY_FRACTION);
    let converged = residual <= opts.tol && boundary_mass <= CONVERGED_BOUNDARY_MASS;
    Ok(GroundStateReport {
        support_radius: rho.support_radius(SUPPORT_MASS_DEFECT),
        spreading: boundary_mass > SPREADING_MASS,
        density: rho,
        energy,
        converged,
        iterations,
        residual,
        boundary_mass,
        energy_monotone: monotone,
        energy_history: history,
    })
}

/// Log-residual of a ground state at its own nodes, with `h∗ρ` recomputed on the grid refined twice.
///
/// The density is the same piecewise-linear function on both grids, so the
/// change from [`GroundStateReport::residual`] measures the convolution quadrature.
pub fn refined_residual(report: &GroundStateReport, h: &InteractionPotential) -> Result<f64> {
    let (fine, _) = report.density.refine(2)?;
    let ev = EnergyEvaluator::new(fine.manifold(), fine.grid(), h)?;
    let conv = ev.convolution(&fine)?;
    let coarse_conv: Vec<f64> = conv.iter().step_by(2).copied().collect();
    Ok(log_residual(report.density.log_values(), &coarse_conv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_curvature(k: f64) -> CurvatureProfile {
        CurvatureProfile::power(k, 1.0).unwrap()
    }

    #[test]
    fn nonexistence_examples() {
        let c = power_curvature(2.0);
        let probe = default_probe();
        let weak = InteractionPotential::power(1.0, 1.5).unwrap();
        let v = check_nonexistence(&weak, &c, 2, 0.5, 1.0, &probe).unwrap();
        assert_eq!(v.verdict, Verdict::Satisfied, "{}", v.note);
        let strong = InteractionPotential::power(1.0, 3.0).unwrap();
        let v = check_nonexistence(&strong, &c, 2, 0.5, 1.0, &probe).unwrap();
        assert_eq!(v.verdict, Verdict::Violated, "{}", v.note);
        let e = CurvatureProfile::exponential(1.0, 1.0).unwrap();
        let slow = InteractionPotential::new(PotentialKind::ExpGrowth { a: 1.0, b: 0.1 }).unwrap();
        let v = check_nonexistence(&slow, &e, 2, 0.5, 1.0, &probe).unwrap();
        assert_eq!(v.verdict, Verdict::Satisfied, "{}", v.note);
    }

    #[test]
    fn nonexistence_rejects_bad_a() {
        let c = power_curvature(2.0);
        let h = InteractionPotential::power(1.0, 1.5).unwrap();
        assert!(check_nonexistence(&h, &c, 2, 1.0, 1.0, &default_probe()).unwrap_err().is_argument());
        assert!(check_nonexistence(&h, &c, 3, 0.0, 1.0, &default_probe()).unwrap_err().is_argument());
    }

    #[test]
    fn existence_examples() {
        let probe = default_probe();
        let v = check_existence(&InteractionPotential::power(1.0, 3.0).unwrap(), &power_curvature(2.0), 2, &probe).unwrap();
        assert_eq!(v.verdict, Verdict::Satisfied, "{}", v.note);
        let fast = InteractionPotential::new(PotentialKind::ExpGrowth { a: 1.0, b: 0.6 }).unwrap();
        let v = check_existence(&fast, &CurvatureProfile::exponential(1.0, 1.0).unwrap(), 2, &probe).unwrap();
        assert_eq!(v.verdict, Verdict::Satisfied, "{}", v.note);
        let lin = InteractionPotential::power(1.0, 1.0).unwrap();
        let v = check_existence(&lin, &CurvatureProfile::constant(1.0).unwrap(), 2, &probe).unwrap();
        assert_eq!(v.verdict, Verdict::Violated, "{}", v.note);
        let concave = InteractionPotential::new(PotentialKind::LogPlus { a: 1.0 }).unwrap();
        assert!(check_existence(&concave, &power_curvature(2.0), 2, &probe).unwrap_err().is_argument());
    }

    #[test]
    fn relaxed_existence_examples() {
        let w = WarpSolution::solve(&CurvatureProfile::constant(1.0).unwrap(), 512.0, 1e-10).unwrap();
        let probe = geometric_probe(1.0, 10);
        let v = check_relaxed_existence(&PotentialKind::Power { a: 1.0, p: 2.0 }, &w, &probe).unwrap();
        assert_eq!(v.verdict, Verdict::Satisfied, "{}", v.note);
        let v = check_relaxed_existence(&PotentialKind::Power { a: 1.0, p: 1.0 }, &w, &probe).unwrap();
        assert_eq!(v.verdict, Verdict::Violated, "{}", v.note);
    }

    #[test]
    fn schedule_grid_contains_radii() {
        let g = schedule_grid(&[1.0, 1.5, 3.3, 16.0], 65).unwrap();
        for r in [1.0, 1.5, 3.3, 16.0] {
            assert!(g.contains(&r));
        }
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(schedule_grid(&[2.0, 1.0], 65).is_err());
    }

    #[test]
    fn spreading_weak_and_strong() {
        let w = WarpSolution::solve_shared(&power_curvature(2.0), 8.0).unwrap();
        let m = ModelManifold::new(2, w).unwrap();
        let schedule: Vec<f64> = (1..=8).map(|r| r as f64).collect();
        let grid = schedule_grid(&schedule, 65).unwrap();
        let pq = PairQuadrature::new(&m, &grid).unwrap();
        let weak = spreading_with(&pq, &m, &InteractionPotential::power(1.0, 1.0).unwrap(), &schedule).unwrap();
        assert!(weak.iter().all(|r| r.energy.total <= r.analytic_bound + 1e-6));
        assert_eq!(spreading_verdict(&weak).verdict, Verdict::Satisfied);
        let strong = spreading_with(&pq, &m, &InteractionPotential::power(1.0, 4.0).unwrap(), &schedule).unwrap();
        assert_eq!(spreading_verdict(&strong).verdict, Verdict::Violated);
        let mut buf = Vec::new();
        write_spread_csv(&mut buf, &weak).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("R,entropy,interaction,total,analytic_bound\n1,"));
    }

    #[test]
    fn zero_potential_tends_to_uniform() {
        let w = WarpSolution::solve_shared(&CurvatureProfile::constant(1.0).unwrap(), 3.0).unwrap();
        let m = ModelManifold::new(2, w).unwrap();
        let opts = GroundStateOptions { nodes: 33, tol: 1e-10, ..GroundStateOptions::new(2.0) };
        let rep = find_ground_state(&m, &InteractionPotential::zero(), opts).unwrap();
        let v = rep.density.values();
        assert!(v.iter().all(|x| (x / v[0] - 1.0).abs() < 1e-8));
        assert!(rep.residual <= 1e-10);
        // uniform density on a bounded grid fills the boundary layer
        assert!(!rep.converged && rep.spreading);
    }

    #[test]
    fn strong_potential_converges() {
        let w = WarpSolution::solve_shared(&power_curvature(2.0), 6.0).unwrap();
        let m = ModelManifold::new(2, w).unwrap();
        let h = InteractionPotential::power(1.0, 4.0).unwrap();
        let opts = GroundStateOptions { nodes: 97, damping: 0.3, ..GroundStateOptions::new(6.0) };
        let rep = find_ground_state(&m, &h, opts).unwrap();
        assert!(rep.converged, "{} {} {}", rep.residual, rep.boundary_mass, rep.iterations);
        assert!(rep.energy_monotone);
        assert!((rep.density.mass() - 1.0).abs() < 1e-9);
        assert!(rep.support_radius < 6.0);
    }

    #[test]
    fn refined_residual_is_second_order() {
        let w = WarpSolution::solve_shared(&power_curvature(1.0), 4.0).unwrap();
        let m = ModelManifold::new(2, w).unwrap();
        let h = InteractionPotential::power(1.0, 3.0).unwrap();
        let change = |nodes| {
            let rep = find_ground_state(&m, &h, GroundStateOptions { nodes, ..GroundStateOptions::new(4.0) }).unwrap();
            assert!(rep.converged);
            (refined_residual(&rep, &h).unwrap() - rep.residual).abs()
        };
        let (coarse, fine) = (change(33), change(65));
        assert!(coarse / fine > 3.0, "{coarse} {fine}");
    }

    #[test]
    fn weak_potential_spreads() {
        let w = WarpSolution::solve_shared(&power_curvature(2.0), 8.0).unwrap();
        let m = ModelManifold::new(2, w).unwrap();
        let h = InteractionPotential::power(1.0, 1.0).unwrap();
        let mass = |r| {
            let rep = find_ground_state(&m, &h, GroundStateOptions { nodes: 49, ..GroundStateOptions::new(r) }).unwrap();
            assert!(!rep.converged && rep.spreading);
            rep.boundary_mass
        };
        assert!(mass(8.0) > mass(4.0));
    }
}
