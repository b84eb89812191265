//! Batch front-end: reads a run configuration, dispatches one command, and
//! writes CSV tables, gnuplot scripts and a `report.json` summary.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use serde_json::{Map, Value};

use commands::{Ctx, Outcome};
use config::{CliError, CliResult, RunConfig};

const SCHEMAS: &str = "\
CONFIG (TOML):
  command = \"solve-warp\" | \"ball-volume\" | \"distance\" | \"energy\" | \"check\"
          | \"spread\" | \"minimize\" | \"verify-inequalities\"
  [manifold]   n (dimension, default 2), theta_max (warp range)
  [curvature]  kind = constant | power | exponential | tabulated
               params: constant {c0}; power {k, scale=1, offset=0};
               exponential {beta, scale=1}; tabulated {nodes, values}
  [c_m], [c_M] lower/upper curvature bounds, same schema (default: [curvature])
  [potential]  kind = zero | power | exp_growth | log_plus | tabulated
               params: power {a=1, p}; exp_growth {a=1, b}; log_plus {a=1};
               tabulated {nodes, values}
  [minorant]   convex minorant of the potential, same schema
  [density]    kind = uniform_ball {radius} | exp_profile {s, radius?}
  [numerics]   tol, nodes, probe, schedule, radii, a, delta, damping, max_iter,
               gs_tol, gs_radius, samples, max_radius, method (bvp_refined |
               fast_march), fm_grid, pairs, sandwich_nodes, s_values
  [output]     dir (default \"out\"), formats (subset of [\"csv\", \"gp\"])
  Unknown keys are rejected and listed with their line numbers.

OUTPUT FILES (CSV: comma-separated, header row, %.17g numbers):
  report.json         always written: command, version, status, error, inputs,
                      flags, outputs, results, verdicts (keys in sorted order)
  warp.csv            theta,log_psi,phi,h,g          (solve-warp)
  ball_volume.csv     R,log_volume,volume,flat_log_volume  (ball-volume)
  distances.csv       r1,r2,alpha,distance,chord_lower,cosine_lower,
                      constant_curvature_oracle      (distance)
  density.csv         r,rho,cumulative_mass          (energy)
  probes.csv          check,theta,value; check indexes report.json verdicts  (check)
  spread.csv          R,entropy,interaction,total,analytic_bound  (spread)
  ground_state.csv    r,rho,cumulative_mass          (minimize)
  history.csv         iteration,energy               (minimize)
  *.gp                gnuplot scripts plotting the CSV next to them

EXIT CODES:
  0 success, 2 invalid configuration or arguments, 3 numerical failure";

/// Ground states of aggregation–diffusion free energies on model manifolds.
#[derive(Debug, Parser, Serialize)]
#[command(name = "hadamard", version, after_help = SCHEMAS)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Warp integration tolerance, overriding `numerics.tol`.
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
    /// Seed of the Monte Carlo validators.
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct Report<'a> {
    command: Option<&'static str>,
    version: &'static str,
    status: &'static str,
    error: Option<String>,
    inputs: Option<&'a RunConfig>,
    flags: &'a Cli,
    outputs: Vec<String>,
    results: Map<String, Value>,
    verdicts: Vec<hadamard::CriterionVerdict>,
}

fn load(cli: &Cli) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Argument(format!("cannot read config {}: {e}", cli.config.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(t) = cli.tol {
        if !(t > 0.0) {
            return Err(CliError::Argument(format!("--tol must be positive, got {t}")));
        }
        cfg.numerics.tol = Some(t);
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.display().to_string();
    }
    Ok(cfg)
}

fn write_report(dir: &std::path::Path, report: &Report) -> std::io::Result<()> {
    // a Value's maps are ordered by key, which gives a stable layout
    let v = serde_json::to_value(report).map_err(std::io::Error::other)?;
    let mut text = serde_json::to_string_pretty(&v).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(dir.join("report.json"), text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: --threads must be a positive integer");
            return ExitCode::from(2);
        }
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            // without a valid config the report goes to --out when given
            if let Some(dir) = &cli.out {
                if std::fs::create_dir_all(dir).is_ok() {
                    let report = Report {
                        command: None,
                        version: hadamard::VERSION,
                        status: e.status(),
                        error: Some(e.to_string()),
                        inputs: None,
                        flags: &cli,
                        outputs: vec![],
                        results: Map::new(),
                        verdicts: vec![],
                    };
                    let _ = write_report(dir, &report);
                }
            }
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let dir = PathBuf::from(&cfg.output.dir);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("error: cannot create output directory {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    let mut ctx = Ctx { cfg: &cfg, dir: dir.clone(), seed: cli.seed, out: Outcome::default() };
    let result = commands::run(&mut ctx);
    let Outcome { results, verdicts, mut files } = ctx.out;
    files.push("report.json".into());
    let report = Report {
        command: Some(cfg.command.name()),
        version: hadamard::VERSION,
        status: result.as_ref().map_or_else(|e| e.status(), |_| "ok"),
        error: result.as_ref().err().map(|e| e.to_string()),
        inputs: Some(&cfg),
        flags: &cli,
        outputs: files,
        results,
        verdicts,
    };
    if let Err(e) = write_report(&dir, &report) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(2);
    }
    match result {
        Ok(()) => {
            for v in &report.verdicts {
                println!("{:<28} {}", v.condition_id, v.verdict);
            }
            println!("wrote {} files to {}", report.outputs.len(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
