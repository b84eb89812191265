//! Run configuration: a TOML file with one section per ingredient.

use std::fmt;

use hadamard::{CurvatureProfile, DistanceMethod, InteractionPotential, PotentialKind};
use serde::{Deserialize, Serialize};

/// Failure classes mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, flags, or violated preconditions (exit 2).
    Argument(String),
    /// The numerics failed (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Argument(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            CliError::Argument(_) => "argument_error",
            CliError::Numerical(_) => "numerical_error",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Argument(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<hadamard::Error> for CliError {
    fn from(e: hadamard::Error) -> Self {
        if e.is_argument() {
            CliError::Argument(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Argument(format!("output error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn arg_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Argument(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveWarp,
    BallVolume,
    Distance,
    Energy,
    Check,
    Spread,
    Minimize,
    VerifyInequalities,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveWarp => "solve-warp",
            Command::BallVolume => "ball-volume",
            Command::Distance => "distance",
            Command::Energy => "energy",
            Command::Check => "check",
            Command::Spread => "spread",
            Command::Minimize => "minimize",
            Command::VerifyInequalities => "verify-inequalities",
        }
    }
}

/// A named family with its parameters, e.g. `kind = "power"`, `params = { k = 2.0 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSection {
    pub kind: String,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSection {
    #[serde(default = "default_dim")]
    pub n: usize,
    /// Radius the warp is solved to; every other radius must stay below it.
    pub theta_max: Option<f64>,
}

fn default_dim() -> usize {
    2
}

impl Default for ManifoldSection {
    fn default() -> Self {
        ManifoldSection { n: default_dim(), theta_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySection {
    UniformBall { radius: f64 },
    ExpProfile { s: f64, radius: Option<f64> },
}

/// Tolerances, grid sizes and schedules; every field has a per-command default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    /// Warp integration tolerance.
    pub tol: Option<f64>,
    /// Radial grid nodes for densities and pair quadratures.
    pub nodes: Option<usize>,
    /// Probe abscissae for the asymptotic checks.
    pub probe: Option<Vec<f64>>,
    /// Radii of the spreading experiment.
    pub schedule: Option<Vec<f64>>,
    /// Radii for `ball-volume`.
    pub radii: Option<Vec<f64>>,
    /// `A` of the nonexistence condition.
    pub a: Option<f64>,
    /// `δ` of the nonexistence condition.
    pub delta: Option<f64>,
    /// Damping of the ground-state iteration.
    pub damping: Option<f64>,
    pub max_iter: Option<usize>,
    /// Residual tolerance of the ground-state iteration.
    pub gs_tol: Option<f64>,
    /// Outer radius of the ground-state grid.
    pub gs_radius: Option<f64>,
    /// Random point pairs for `distance`.
    pub samples: Option<usize>,
    /// Largest radius of the random point pairs.
    pub max_radius: Option<f64>,
    pub method: Option<DistanceMethod>,
    /// Fast-marching grid size per axis.
    pub fm_grid: Option<usize>,
    /// Monte Carlo pairs for the angular-law validator.
    pub pairs: Option<usize>,
    /// Nodes of the comparison sandwich grid.
    pub sandwich_nodes: Option<usize>,
    /// Scales of the exponential-profile family.
    pub s_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Subset of `csv`, `gp`; `report.json` is always written.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "gp".into()]
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir(), formats: default_formats() }
    }
}

impl OutputSection {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub manifold: ManifoldSection,
    /// Curvature `c` of the model manifold.
    pub curvature: Option<ProfileSection>,
    /// Lower curvature bound `c_m` (defaults to `curvature`).
    pub c_m: Option<ProfileSection>,
    /// Upper curvature bound `c_M` (defaults to `curvature`).
    #[serde(rename = "c_M")]
    pub c_upper: Option<ProfileSection>,
    /// Interaction potential `h`.
    pub potential: Option<ProfileSection>,
    /// Convex minorant `φ ≤ h`.
    pub minorant: Option<ProfileSection>,
    pub density: Option<DensitySection>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: OutputSection,
}

/// Line of `path` (dotted key) in the config text, for error messages.
fn key_line(text: &str, path: &str) -> Option<usize> {
    let (section, key) = match path.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", path),
    };
    let mut current = String::new();
    let mut fallback = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            if current == path {
                return Some(i + 1);
            }
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs = lhs.trim();
        let full = if current.is_empty() { lhs.to_string() } else { format!("{current}.{lhs}") };
        if full == path {
            return Some(i + 1);
        }
        // inline tables such as `params = { k = 2 }`
        if fallback.is_none() && section.starts_with(&full) && line.contains(key) {
            fallback = Some(i + 1);
        }
    }
    fallback
}

fn anchored(text: &str, path: &str, msg: String) -> String {
    match key_line(text, path) {
        Some(l) => format!("line {l}: {msg}"),
        None => msg,
    }
}

impl RunConfig {
    /// Parses a config, rejecting unknown keys with all offending paths listed.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut unknown = Vec::new();
        let de = toml::Deserializer::new(text);
        let cfg: RunConfig = serde_ignored::deserialize(de, |p| unknown.push(p.to_string()))
            .map_err(|e| CliError::Argument(format!("malformed config: {}", e.to_string().trim_end())))?;
        if !unknown.is_empty() {
            let listed: Vec<String> = unknown.iter().map(|p| anchored(text, p, format!("`{p}`"))).collect();
            return arg_err(format!("unknown config keys: {}", listed.join(", ")));
        }
        let check_params = |name: &str, sec: &Option<ProfileSection>, allowed: fn(&str) -> Option<&'static [&'static str]>| {
            let Some(sec) = sec else { return Ok(()) };
            let Some(keys) = allowed(&sec.kind) else {
                return arg_err(anchored(text, &format!("{name}.kind"), format!("unknown {name} kind `{}`", sec.kind)));
            };
            let bad: Vec<String> = sec.params.keys().filter(|k| !keys.contains(&k.as_str())).cloned().collect();
            if bad.is_empty() {
                Ok(())
            } else {
                let paths: Vec<String> = bad
                    .iter()
                    .map(|k| {
                        let p = format!("{name}.params.{k}");
                        anchored(text, &p, format!("`{p}`"))
                    })
                    .collect();
                arg_err(format!("unknown config keys: {} (allowed for `{}`: {})", paths.join(", "), sec.kind, keys.join(", ")))
            }
        };
        check_params("curvature", &cfg.curvature, curvature_keys)?;
        check_params("c_m", &cfg.c_m, curvature_keys)?;
        check_params("c_M", &cfg.c_upper, curvature_keys)?;
        check_params("potential", &cfg.potential, potential_keys)?;
        check_params("minorant", &cfg.minorant, potential_keys)?;
        for f in &cfg.output.formats {
            if f != "csv" && f != "gp" {
                return arg_err(anchored(text, "output.formats", format!("unknown output format `{f}` (csv, gp)")));
            }
        }
        if cfg.manifold.n < 2 {
            return arg_err(anchored(text, "manifold.n", "manifold.n must be at least 2".into()));
        }
        Ok(cfg)
    }

    pub fn curvature(&self) -> CliResult<CurvatureProfile> {
        match &self.curvature {
            Some(s) => curvature_from(s, "curvature"),
            None => arg_err(format!("command `{}` needs a [curvature] section", self.command.name())),
        }
    }

    /// Lower bound `c_m`, falling back to `curvature`.
    pub fn c_lower(&self) -> CliResult<CurvatureProfile> {
        match &self.c_m {
            Some(s) => curvature_from(s, "c_m"),
            None => self.curvature(),
        }
    }

    /// Upper bound `c_M`, falling back to `curvature`.
    pub fn c_upper(&self) -> CliResult<CurvatureProfile> {
        match &self.c_upper {
            Some(s) => curvature_from(s, "c_M"),
            None => self.curvature(),
        }
    }

    pub fn potential(&self) -> CliResult<InteractionPotential> {
        let Some(s) = &self.potential else {
            return arg_err(format!("command `{}` needs a [potential] section", self.command.name()));
        };
        let h = InteractionPotential::new(potential_from(s, "potential")?)?;
        match &self.minorant {
            Some(phi) => Ok(h.with_minorant(potential_from(phi, "minorant")?)?),
            None => Ok(h),
        }
    }

    pub fn theta_max(&self, default: f64) -> CliResult<f64> {
        let t = self.manifold.theta_max.unwrap_or(default);
        if !(t > 0.0) || !t.is_finite() {
            return arg_err(format!("manifold.theta_max must be positive, got {t}"));
        }
        Ok(t)
    }
}

fn curvature_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "constant" => &["c0"],
        "power" => &["k", "scale", "offset"],
        "exponential" => &["beta", "scale"],
        "tabulated" => &["nodes", "values"],
        _ => return None,
    })
}

fn potential_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "zero" => &[],
        "power" => &["a", "p"],
        "exp_growth" => &["a", "b"],
        "log_plus" => &["a"],
        "tabulated" => &["nodes", "values"],
        _ => return None,
    })
}

/// Fills family defaults and deserializes `{kind, params…}` into `T`.
fn tagged<T: serde::de::DeserializeOwned>(sec: &ProfileSection, defaults: &[(&str, f64)], what: &str) -> CliResult<T> {
    let mut t = sec.params.clone();
    for (k, v) in defaults {
        t.entry(k.to_string()).or_insert(toml::Value::Float(*v));
    }
    // integers are accepted wherever reals are expected
    for (_, v) in t.iter_mut() {
        match v {
            toml::Value::Integer(i) => *v = toml::Value::Float(*i as f64),
            toml::Value::Array(a) => a.iter_mut().for_each(|x| {
                if let toml::Value::Integer(i) = x {
                    *x = toml::Value::Float(*i as f64);
                }
            }),
            _ => {}
        }
    }
    t.insert("kind".into(), toml::Value::String(sec.kind.clone()));
    toml::Value::Table(t)
        .try_into()
        .map_err(|e| CliError::Argument(format!("invalid [{what}] section: {}", e.to_string().trim_end())))
}

pub fn curvature_from(sec: &ProfileSection, what: &str) -> CliResult<CurvatureProfile> {
    let defaults: &[(&str, f64)] = match sec.kind.as_str() {
        "power" => &[("scale", 1.0), ("offset", 0.0)],
        "exponential" => &[("scale", 1.0)],
        _ => &[],
    };
    let c: CurvatureProfile = tagged(sec, defaults, what)?;
    c.validate().map_err(|e| CliError::Argument(format!("invalid [{what}] section: {e}")))?;
    Ok(c)
}

pub fn potential_from(sec: &ProfileSection, what: &str) -> CliResult<PotentialKind> {
    let defaults: &[(&str, f64)] = match sec.kind.as_str() {
        "power" | "exp_growth" | "log_plus" => &[("a", 1.0)],
        _ => &[],
    };
    let k: PotentialKind = tagged(sec, defaults, what)?;
    k.validate().map_err(|e| CliError::Argument(format!("invalid [{what}] section: {e}")))?;
    Ok(k)
}
