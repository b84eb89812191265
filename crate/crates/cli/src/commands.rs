//! One function per command; each fills an [`Outcome`] and writes its data files.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use hadamard::analysis::{
    check_existence, check_nonexistence, check_relaxed_existence, default_a, default_probe, find_ground_state,
    refined_residual, schedule_grid, spreading_verdict, spreading_with, write_spread_csv, GroundStateOptions,
    DEFAULT_DELTA,
};
use hadamard::energy::{
    angular_ks_statistic, hls_gap_with, jensen_check_with, w1_sandwich_with, EnergyEvaluator, PairQuadrature,
};
use hadamard::geometry::{chord, cosine_lower_bound, hyperbolic_distance, log_unit_ball_volume};
use hadamard::output::write_csv;
use hadamard::warp::{sandwich_check, DEFAULT_TOL};
use hadamard::{
    check_c32, CriterionVerdict, CurvatureProfile, DistanceMethod, GridSpec, InteractionPotential, ModelManifold,
    RadialDensity, Verdict, WarpSolution,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{arg_err, CliResult, Command, DensitySection, RunConfig};

/// Slack of the comparison sandwich in the log domain.
const SANDWICH_SLACK: f64 = 1e-8;
/// Slack of the uniform-ball energy bound.
const BALL_BOUND_SLACK: f64 = 1e-6;

/// Results, verdicts and files produced by a command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Map<String, Value>,
    pub verdicts: Vec<CriterionVerdict>,
    pub files: Vec<String>,
}

/// Per-run state shared by the commands.
pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub dir: PathBuf,
    pub seed: u64,
    pub out: Outcome,
}

impl<'a> Ctx<'a> {
    fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.out.results.insert(key.to_string(), v);
    }

    fn verdict(&mut self, v: CriterionVerdict) {
        self.out.verdicts.push(v);
    }

    fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let f = File::create(self.dir.join(name))?;
        self.out.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<f64>>) -> CliResult<()> {
        if self.cfg.output.wants("csv") {
            let w = self.create(name)?;
            write_csv(w, header, rows)?;
        }
        Ok(())
    }

    /// Gnuplot script plotting columns of a CSV written by the same run.
    fn gp(&mut self, name: &str, csv: &str, x: &str, series: &[(usize, &str)], logy: bool) -> CliResult<()> {
        if !(self.cfg.output.wants("gp") && self.cfg.output.wants("csv")) {
            return Ok(());
        }
        use std::io::Write;
        let png = name.trim_end_matches(".gp");
        let mut w = self.create(name)?;
        writeln!(w, "# gnuplot script for {csv}")?;
        writeln!(w, "set datafile separator ','")?;
        writeln!(w, "set terminal pngcairo size 900,600")?;
        writeln!(w, "set output '{png}.png'")?;
        writeln!(w, "set key autotitle columnhead")?;
        writeln!(w, "set xlabel '{x}'")?;
        if logy {
            writeln!(w, "set logscale y")?;
        }
        let plots: Vec<String> =
            series.iter().map(|(col, title)| format!("'{csv}' using 1:{col} with lines title '{title}'")).collect();
        writeln!(w, "plot {}", plots.join(", \\\n     "))?;
        Ok(())
    }

    fn warp_tol(&self) -> f64 {
        self.cfg.numerics.tol.unwrap_or(DEFAULT_TOL)
    }

    fn manifold(&self, c: &CurvatureProfile, theta_max: f64) -> CliResult<ModelManifold> {
        let w = WarpSolution::solve(c, theta_max, self.warp_tol())?;
        Ok(ModelManifold::new(self.cfg.manifold.n, std::sync::Arc::new(w))?)
    }

    fn nodes(&self, default: usize) -> CliResult<usize> {
        let n = self.cfg.numerics.nodes.unwrap_or(default);
        if n < 5 {
            return arg_err(format!("numerics.nodes must be at least 5, got {n}"));
        }
        Ok(n)
    }
}

pub fn run(ctx: &mut Ctx) -> CliResult<()> {
    match ctx.cfg.command {
        Command::SolveWarp => solve_warp(ctx),
        Command::BallVolume => ball_volume(ctx),
        Command::Distance => distance(ctx),
        Command::Energy => energy(ctx),
        Command::Check => check(ctx),
        Command::Spread => spread(ctx),
        Command::Minimize => minimize(ctx),
        Command::VerifyInequalities => verify_inequalities(ctx),
    }
}

fn increasing_positive(xs: &[f64], what: &str) -> CliResult<()> {
    if xs.is_empty() || xs[0] <= 0.0 || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return arg_err(format!("{what} must be a non-empty, strictly increasing list of positive numbers"));
    }
    Ok(())
}

fn solve_warp(ctx: &mut Ctx) -> CliResult<()> {
    let c = ctx.cfg.curvature()?;
    let theta_max = ctx.cfg.theta_max(20.0)?;
    let w = WarpSolution::solve(&c, theta_max, ctx.warp_tol())?;
    let rows: Vec<Vec<f64>> = w.rows().map(|r| vec![r.theta, r.log_psi, r.phi, r.h, 1.0 / r.phi]).collect();
    ctx.result("nodes", w.len());
    ctx.result("theta_init", w.theta_init());
    ctx.result("invariants", w.invariants());
    ctx.result("log_psi_at_theta_max", w.log_psi(theta_max)?);
    ctx.csv("warp.csv", &["theta", "log_psi", "phi", "h", "g"], rows)?;
    ctx.gp("warp.gp", "warp.csv", "theta", &[(2, "log psi"), (4, "H")], false)?;
    let mut skipped = Map::new();
    for (name, check) in [
        ("sqrt_c_G_limit", w.check_sqrtcg_limit()),
        ("linear_growth", w.check_linear_growth()),
    ] {
        match check {
            Ok(v) => ctx.verdict(v),
            Err(e) if e.is_argument() => {
                skipped.insert(name.into(), Value::String(e.to_string()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    ctx.result("skipped_checks", skipped);
    Ok(())
}

fn ball_volume(ctx: &mut Ctx) -> CliResult<()> {
    let c = ctx.cfg.curvature()?;
    let radii = ctx.cfg.numerics.radii.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0, 5.0]);
    increasing_positive(&radii, "numerics.radii")?;
    let m = ctx.manifold(&c, ctx.cfg.theta_max(*radii.last().unwrap())?)?;
    let n = m.dim() as f64;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for &r in &radii {
        let b = m.ball_volume(r)?;
        let flat = log_unit_ball_volume(m.dim()) + n * r.ln();
        rows.push(vec![r, b.log_volume, b.volume, flat]);
        table.push(serde_json::json!({ "R": r, "log_volume": b.log_volume, "volume": b.volume, "overflow": b.overflow }));
    }
    ctx.result("balls", table);
    ctx.csv("ball_volume.csv", &["R", "log_volume", "volume", "flat_log_volume"], rows)?;
    ctx.gp("ball_volume.gp", "ball_volume.csv", "R", &[(2, "log volume"), (4, "flat log volume")], false)
}

fn distance(ctx: &mut Ctx) -> CliResult<()> {
    let c = ctx.cfg.curvature()?;
    let nm = &ctx.cfg.numerics;
    let samples = nm.samples.unwrap_or(100);
    let max_radius = nm.max_radius.unwrap_or(5.0);
    let method = nm.method.unwrap_or_default();
    let fm_grid = nm.fm_grid.unwrap_or(513);
    if !(max_radius > 0.0) || samples == 0 {
        return arg_err("numerics.max_radius and numerics.samples must be positive");
    }
    let m = ctx.manifold(&c, ctx.cfg.theta_max(max_radius)?)?;
    let oracle = match c {
        CurvatureProfile::Constant { c0 } => Some(c0),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let triples: Vec<(f64, f64, f64)> = (0..samples)
        .map(|_| (rng.gen_range(0.0..=max_radius), rng.gen_range(0.0..=max_radius), rng.gen_range(0.0..=PI)))
        .collect();
    let mut rows = Vec::new();
    let (mut chord_violations, mut cosine_violations) = (0usize, 0usize);
    let mut worst_rel: f64 = 0.0;
    for &(r1, r2, a) in &triples {
        let d = match method {
            DistanceMethod::BvpRefined => m.distance(r1, r2, a, method)?,
            DistanceMethod::FastMarch => {
                let spec = GridSpec { nr: fm_grid, nphi: fm_grid, r_max: r1.max(r2), estimate_error: true };
                m.distance_field(r1, spec)?.query(r2, a)?
            }
        };
        let (lc, lp) = (chord(r1, r2, a), cosine_lower_bound(r1, r2, a));
        let slack = 1e-12 * d.max(1.0);
        chord_violations += usize::from(d < lc - slack);
        cosine_violations += usize::from(d < lp - slack);
        let exact = oracle.map_or(f64::NAN, |c0| hyperbolic_distance(c0, r1, r2, a));
        if exact > 0.0 {
            worst_rel = worst_rel.max((d - exact).abs() / exact);
        }
        rows.push(vec![r1, r2, a, d, lc, lp, exact]);
    }
    ctx.result("method", method);
    ctx.result("samples", samples);
    ctx.result("chord_bound_violations", chord_violations);
    ctx.result("cosine_bound_violations", cosine_violations);
    if oracle.is_some() {
        ctx.result("max_relative_error_vs_law_of_cosines", worst_rel);
    }
    let bounds = CriterionVerdict::new("distance_lower_bounds");
    let total = chord_violations + cosine_violations;
    ctx.verdict(if total == 0 {
        bounds.with(Verdict::Satisfied, 0.0, format!("{samples} pairs, no bound violated"))
    } else {
        bounds.with(Verdict::Violated, total as f64, format!("{total} bound violations in {samples} pairs"))
    });
    ctx.csv("distances.csv", &["r1", "r2", "alpha", "distance", "chord_lower", "cosine_lower", "constant_curvature_oracle"], rows)
}

fn build_density(ctx: &Ctx, m: &ModelManifold, nodes: usize) -> CliResult<RadialDensity> {
    let Some(d) = &ctx.cfg.density else {
        return arg_err(format!("command `{}` needs a [density] section", ctx.cfg.command.name()));
    };
    Ok(match *d {
        DensitySection::UniformBall { radius } => RadialDensity::uniform_ball_with(m, radius, nodes)?,
        DensitySection::ExpProfile { s, radius: Some(r) } => RadialDensity::exp_profile_on(m, s, r, nodes)?,
        DensitySection::ExpProfile { s, radius: None } => RadialDensity::exp_profile_with(m, s, nodes)?,
    })
}

fn energy(ctx: &mut Ctx) -> CliResult<()> {
    let c = ctx.cfg.curvature()?;
    let h = match ctx.cfg.potential {
        Some(_) => ctx.cfg.potential()?,
        None => InteractionPotential::zero(),
    };
    let default_max = match ctx.cfg.density {
        Some(DensitySection::UniformBall { radius }) | Some(DensitySection::ExpProfile { radius: Some(radius), .. }) => {
            2.0 * radius
        }
        _ => 16.0,
    };
    let m = ctx.manifold(&c, ctx.cfg.theta_max(default_max)?)?;
    let rho = build_density(ctx, &m, ctx.nodes(257)?)?;
    let pq = PairQuadrature::new(&m, rho.grid())?;
    let e = EnergyEvaluator::from_pairs(&pq, &h)?.free_energy(&rho)?;
    ctx.result("energy", e);
    ctx.result("mass", rho.mass());
    ctx.result("w1_to_pole", rho.w1_to_pole());
    ctx.result("support_radius", rho.support_radius(1e-6));
    ctx.verdict(w1_sandwich_with(&pq, &rho)?);
    match jensen_check_with(&pq, &rho) {
        Ok(v) => ctx.verdict(v),
        Err(e) if e.is_argument() => ctx.result("jensen_skipped", e.to_string()),
        Err(e) => return Err(e.into()),
    }
    ctx.result("hls", hls_gap_with(&pq, &rho)?);
    if ctx.cfg.output.wants("csv") {
        let w = ctx.create("density.csv")?;
        rho.write_csv(w)?;
    }
    ctx.gp("density.gp", "density.csv", "r", &[(2, "rho"), (3, "cumulative mass")], false)
}

fn check(ctx: &mut Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    let n = cfg.manifold.n;
    let h = cfg.potential()?;
    let c_upper = cfg.c_upper()?;
    let c_lower = cfg.c_lower()?;
    let probe = cfg.numerics.probe.clone().unwrap_or_else(default_probe);
    increasing_positive(&probe, "numerics.probe")?;
    let a = cfg.numerics.a.unwrap_or_else(|| default_a(n));
    let delta = cfg.numerics.delta.unwrap_or(DEFAULT_DELTA);
    ctx.result("probe", &probe);
    ctx.result("a", a);
    ctx.result("delta", delta);
    let c32_probe = hadamard::verdict::geometric_probe(1.0, 12);
    ctx.verdict(CriterionVerdict { condition_id: "c32_upper".into(), ..check_c32(&c_upper, &c32_probe)? });
    ctx.verdict(check_nonexistence(&h, &c_upper, n, a, delta, &probe)?);
    let mut skipped = Map::new();
    match h.convex_minorant() {
        Ok(phi) => {
            let phi = phi.clone();
            ctx.verdict(check_existence(&h, &c_lower, n, &probe)?);
            let theta_max = cfg.theta_max(*probe.last().unwrap())?;
            let warp = WarpSolution::solve(&c_lower, theta_max, ctx.warp_tol())?;
            ctx.verdict(check_relaxed_existence(&phi, &warp, &probe)?);
        }
        Err(e) => {
            for name in ["existence", "relaxed_existence"] {
                skipped.insert(name.into(), Value::String(e.to_string()));
            }
        }
    }
    ctx.result("skipped_checks", skipped);
    let rows: Vec<Vec<f64>> = ctx
        .out
        .verdicts
        .iter()
        .enumerate()
        .flat_map(|(k, v)| v.probes.iter().map(move |&(t, x)| vec![k as f64, t, x]))
        .collect();
    ctx.csv("probes.csv", &["check", "theta", "value"], rows)
}

fn schedule(ctx: &Ctx) -> CliResult<Vec<f64>> {
    let s = ctx.cfg.numerics.schedule.clone().unwrap_or_else(|| (1..=16).map(f64::from).collect());
    increasing_positive(&s, "numerics.schedule")?;
    Ok(s)
}

fn spread(ctx: &mut Ctx) -> CliResult<()> {
    let c = ctx.cfg.curvature()?;
    let h = ctx.cfg.potential()?;
    let schedule = schedule(ctx)?;
    let m = ctx.manifold(&c, ctx.cfg.theta_max(*schedule.last().unwrap())?)?;
    let grid = schedule_grid(&schedule, ctx.nodes(129)?)?;
    let pq = PairQuadrature::new(&m, &grid)?;
    let rows = spreading_with(&pq, &m, &h, &schedule)?;
    let violations = rows.iter().filter(|r| r.energy.total > r.analytic_bound + BALL_BOUND_SLACK).count();
    ctx.result("rows", &rows);
    ctx.result("bound_violations", violations);
    ctx.verdict(spreading_verdict(&rows));
    if ctx.cfg.output.wants("csv") {
        let w = ctx.create("spread.csv")?;
        write_spread_csv(w, &rows)?;
    }
    ctx.gp("spread.gp", "spread.csv", "R", &[(4, "total"), (5, "analytic bound")], false)
}

fn minimize(ctx: &mut Ctx) -> CliResult<()> {
    let c = ctx.cfg.curvature()?;
    let h = ctx.cfg.potential()?;
    let nm = &ctx.cfg.numerics;
    let radius = nm.gs_radius.unwrap_or(4.0);
    let mut opts = GroundStateOptions::new(radius);
    opts.nodes = ctx.nodes(opts.nodes)?;
    opts.damping = nm.damping.unwrap_or(opts.damping);
    opts.max_iter = nm.max_iter.unwrap_or(opts.max_iter);
    opts.tol = nm.gs_tol.unwrap_or(opts.tol);
    let m = ctx.manifold(&c, ctx.cfg.theta_max(radius)?)?;
    let rep = find_ground_state(&m, &h, opts)?;
    ctx.result("options", opts);
    ctx.result("report", &rep);
    if rep.converged {
        ctx.result("refined_residual", refined_residual(&rep, &h)?);
    }
    let v = CriterionVerdict::new("ground_state");
    let note = format!("residual {:.3e}, boundary mass {:.3e}", rep.residual, rep.boundary_mass);
    ctx.verdict(if rep.converged {
        v.with(Verdict::Satisfied, rep.residual, note)
    } else if rep.spreading {
        v.with(Verdict::Violated, rep.boundary_mass, format!("spreading: {note}"))
    } else {
        v.with(Verdict::Inconclusive, rep.residual, note)
    });
    if ctx.cfg.output.wants("csv") {
        let w = ctx.create("ground_state.csv")?;
        rep.density.write_csv(w)?;
    }
    let history: Vec<Vec<f64>> = rep.energy_history.iter().enumerate().map(|(i, e)| vec![i as f64, *e]).collect();
    ctx.csv("history.csv", &["iteration", "energy"], history)?;
    ctx.gp("ground_state.gp", "ground_state.csv", "r", &[(2, "rho")], false)
}

fn verify_inequalities(ctx: &mut Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    let n = cfg.manifold.n;
    let c = cfg.curvature()?;
    let theta_max = cfg.theta_max(20.0)?;
    let nodes = cfg.numerics.sandwich_nodes.unwrap_or(512);
    let (cu, cl) = (cfg.c_upper()?, cfg.c_lower()?);
    ctx.verdict(sandwich_check(&cu, &c, &cl, n, theta_max, nodes, SANDWICH_SLACK)?);

    let m = ctx.manifold(&c, theta_max)?;
    let dens_nodes = ctx.nodes(129)?;
    let s_values = cfg.numerics.s_values.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0, 4.0]);
    increasing_positive(&s_values, "numerics.s_values")?;
    let mut family = Vec::new();
    let mut min_gap = f64::INFINITY;
    for &s in &s_values {
        let rho = match RadialDensity::exp_profile_with(&m, s, dens_nodes) {
            Ok(r) => r,
            Err(e) if e.is_argument() => {
                family.push(serde_json::json!({ "s": s, "skipped": e.to_string() }));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let pq = PairQuadrature::new(&m, rho.grid())?;
        let w1 = w1_sandwich_with(&pq, &rho)?;
        let jensen = match jensen_check_with(&pq, &rho) {
            Ok(v) => Some(v),
            Err(e) if e.is_argument() => None,
            Err(e) => return Err(e.into()),
        };
        let gap = hls_gap_with(&pq, &rho)?;
        min_gap = min_gap.min(gap.gap);
        family.push(serde_json::json!({
            "s": s,
            "w1_sandwich": w1.verdict,
            "jensen": jensen.as_ref().map(|j| j.verdict),
            "hls": gap,
        }));
        ctx.verdict(CriterionVerdict { condition_id: format!("w1_sandwich_s={s}"), ..w1 });
        if let Some(j) = jensen {
            ctx.verdict(CriterionVerdict { condition_id: format!("jensen_s={s}"), ..j });
        }
    }
    ctx.result("exp_profile_family", family);
    ctx.result("hls_gap_min", if min_gap.is_finite() { Value::from(min_gap) } else { Value::Null });

    let pairs = cfg.numerics.pairs.unwrap_or(1_000_000);
    let ks = angular_ks_statistic(n, pairs, ctx.seed)?;
    let threshold = 2.0 / (pairs as f64).sqrt();
    let v = CriterionVerdict::new("angular_law_ks");
    let note = format!("KS {ks:.3e} with {pairs} pairs, threshold {threshold:.3e}");
    ctx.verdict(if ks < threshold { v.with(Verdict::Satisfied, ks, note) } else { v.with(Verdict::Violated, ks, note) });
    Ok(())
}
