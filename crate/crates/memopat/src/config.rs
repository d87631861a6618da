//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; unknown
//! keys, duplicates and malformed lines are rejected with the line number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use memopat_core::solver::SolverConfig;
use memopat_core::stability::DEFAULT_N_MAX;
use memopat_core::{EncodingFamily, Grid, GrowthModel, ModelSpec, SmoothStep};

/// Line number used for values given on the command line.
pub const OVERRIDE_LINE: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("{}: invalid `{key}`: {reason}", Where(*.line))]
    Validation {
        key: String,
        line: usize,
        reason: String,
    },
}

struct Where(usize);

impl fmt::Display for Where {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            OVERRIDE_LINE => f.write_str("override or default"),
            n => write!(f, "line {n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    StabilityRegion,
    Dispersion,
    Bifcoef,
    Simulate,
    Sweep,
    MassCurve,
    VerifyEquivalence,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::StabilityRegion,
        Command::Dispersion,
        Command::Bifcoef,
        Command::Simulate,
        Command::Sweep,
        Command::MassCurve,
        Command::VerifyEquivalence,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::StabilityRegion => "stability-region",
            Command::Dispersion => "dispersion",
            Command::Bifcoef => "bifcoef",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::MassCurve => "mass-curve",
            Command::VerifyEquivalence => "verify-equivalence",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "expected one of {}",
                    Command::ALL.map(|c| c.as_str()).join(", ")
                )
            })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const KEYS: &[&str] = &[
    "command",
    "d",
    "alpha",
    "R",
    "growth",
    "growth_rate",
    "capacity",
    "encoding",
    "base",
    "rho",
    "mu",
    "beta",
    "epsilon",
    "gamma",
    "u_star",
    "n_cells",
    "dt",
    "t_max",
    "steady_tol",
    "seed",
    "perturb_amp",
    "delta0",
    "n_points",
    "n_max",
    "R_min",
    "R_max",
    "n_R",
    "R_list",
    "alpha_min",
    "alpha_max",
    "n_alpha",
    "threads",
    "output",
    "emit_svg",
    "snapshot_stride",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub spec: ModelSpec,
    pub solver: SolverConfig,
    /// Sweep half-width; `None` means 15% of `|α*|`.
    pub delta0: Option<f64>,
    pub n_points: usize,
    pub n_max: u32,
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub r_list: Vec<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub n_alpha: usize,
    pub threads: Option<usize>,
    pub output: PathBuf,
    pub emit_svg: bool,
    /// Steps between trajectory snapshots for `simulate`; 0 disables.
    pub snapshot_stride: usize,
    /// Every key with its effective value, in `KEYS` order.
    pub resolved: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

struct Entries(BTreeMap<String, Entry>);

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.0.get(key).map_or(OVERRIDE_LINE, |e| e.line)
    }

    fn invalid(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::Validation {
            key: key.to_string(),
            line: self.line(key),
            reason: reason.into(),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| self.invalid(key, err.to_string())),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.or(key, default)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(self.invalid(key, "must be a finite number > 0"));
        }
        Ok(v)
    }

    fn finite(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.get(key)?;
        if v.is_some_and(|v| !v.is_finite()) {
            return Err(self.invalid(key, "must be finite"));
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        let v = self.or(key, default)?;
        if v < min {
            return Err(self.invalid(key, format!("must be >= {min}")));
        }
        Ok(v)
    }
}

fn split_lines(text: &str) -> Result<Vec<(String, Entry)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            reason: format!("expected `key = value`, got `{body}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line,
                reason: "missing key".into(),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                reason: format!("missing value for `{key}`"),
            });
        }
        out.push((
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        ));
    }
    Ok(out)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with_overrides(text, &[])
}

/// Parses `text`, then applies `overrides` (later wins) before validation.
pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<RunConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (key, entry) in split_lines(text)? {
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                key,
                line: entry.line,
            });
        }
        if let Some(prev) = map.get(&key) {
            let prev: &Entry = prev;
            return Err(ConfigError::Parse {
                line: entry.line,
                reason: format!("duplicate key `{key}` (first on line {})", prev.line),
            });
        }
        map.insert(key, entry);
    }
    for (key, value) in overrides {
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                key: key.clone(),
                line: OVERRIDE_LINE,
            });
        }
        map.insert(
            key.clone(),
            Entry {
                value: value.clone(),
                line: OVERRIDE_LINE,
            },
        );
    }
    resolve(&Entries(map))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected true/false, got `{s}`")),
    }
}

fn resolve(e: &Entries) -> Result<RunConfig, ConfigError> {
    let command = e.or("command", Command::Simulate)?;

    let growth_name: String = e.or("growth", "none".to_string())?;
    let u_star: Option<f64> = e.finite("u_star")?;
    let growth = match growth_name.as_str() {
        "logistic" => GrowthModel::Logistic {
            rate: e.or("growth_rate", 1.0)?,
            capacity: e.or("capacity", 1.0)?,
        },
        "none" => GrowthModel::NoGrowth,
        other => {
            return Err(e.invalid(
                "growth",
                format!("expected logistic or none, got `{other}`"),
            ))
        }
    };

    let rho = e.or("rho", 1.0)?;
    let mu = e.or("mu", 0.15)?;
    let beta = e.or("beta", 0.5)?;
    let family = |name: &str, key: &str| -> Result<EncodingFamily, ConfigError> {
        match name {
            "ratio_quadratic" => Ok(EncodingFamily::ratio_quadratic(rho, mu, beta)),
            "ratio_linear" => Ok(EncodingFamily::ratio_linear(rho, mu, beta)),
            other => Err(e.invalid(
                key,
                format!("expected ratio_quadratic or ratio_linear, got `{other}`"),
            )),
        }
    };
    let encoding_name: String = e.or("encoding", "ratio_quadratic".to_string())?;
    let encoding = match encoding_name.as_str() {
        "smooth_step" => {
            let base: String = e.or("base", "ratio_quadratic".to_string())?;
            let center = match growth {
                GrowthModel::Logistic { capacity, .. } => capacity,
                GrowthModel::NoGrowth => u_star.unwrap_or(0.0),
            };
            family(&base, "base")?.with_step(SmoothStep {
                epsilon: e.or("epsilon", SmoothStep::DEFAULT_EPSILON)?,
                gamma: e.or("gamma", SmoothStep::DEFAULT_GAMMA)?,
                center,
            })
        }
        name => {
            for key in ["base", "epsilon", "gamma"] {
                if e.0.contains_key(key) {
                    return Err(e.invalid(key, "only used with encoding = smooth_step"));
                }
            }
            family(name, "encoding")?
        }
    };

    let d = e.or("d", 1.0)?;
    let alpha = e.or("alpha", 0.0)?;
    let radius = e.or("R", 1.0)?;
    let spec =
        ModelSpec::new(d, alpha, radius, growth, encoding, u_star).map_err(|err| match err {
            memopat_core::Error::InvalidParameter { name, reason } => e.invalid(name, reason),
            other => e.invalid("growth", other.to_string()),
        })?;
    spec.linearize()
        .map_err(|err| e.invalid("growth", err.to_string()))?;

    let n_cells: usize = e.or("n_cells", 256)?;
    let grid = Grid::new(n_cells).map_err(|_| e.invalid("n_cells", "must be even and >= 8"))?;
    let mut solver = SolverConfig::new(grid);
    solver.dt = e.positive("dt", solver.dt)?;
    solver.t_max = e.positive("t_max", solver.t_max)?;
    solver.steady_tol = e.positive("steady_tol", solver.steady_tol)?;
    solver.seed = e.or("seed", 0)?;
    solver.perturb_amp = e.or("perturb_amp", solver.perturb_amp)?;
    if !(solver.perturb_amp >= 0.0) || !solver.perturb_amp.is_finite() {
        return Err(e.invalid("perturb_amp", "must be a finite number >= 0"));
    }

    let delta0 = match e.get::<f64>("delta0")? {
        Some(v) if !(v > 0.0) || !v.is_finite() => return Err(e.invalid("delta0", "must be > 0")),
        v => v,
    };
    let n_points = e.count("n_points", crate::sweep::DEFAULT_POINTS, 2)?;
    let n_max: u32 = e.or("n_max", DEFAULT_N_MAX)?;
    if n_max == 0 {
        return Err(e.invalid("n_max", "must be >= 1"));
    }
    let r_min = e.positive("R_min", 0.05)?;
    let r_max = e.positive("R_max", 3.0)?;
    if r_max <= r_min {
        return Err(e.invalid("R_max", "must exceed R_min"));
    }
    let n_r = e.count("n_R", 60, 1)?;
    let r_list = match e.0.get("R_list") {
        None => vec![0.12, 0.3, 2.0],
        Some(entry) => entry
            .value
            .split(',')
            .map(|s| match s.trim().parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
                _ => Err(e.invalid("R_list", format!("`{}` is not a radius > 0", s.trim()))),
            })
            .collect::<Result<_, _>>()?,
    };
    let alpha_min = e.finite("alpha_min")?;
    let alpha_max = e.finite("alpha_max")?;
    if let (Some(lo), Some(hi)) = (alpha_min, alpha_max) {
        if hi <= lo {
            return Err(e.invalid("alpha_max", "must exceed alpha_min"));
        }
    }
    let n_alpha = e.count("n_alpha", 40, 2)?;
    let threads = match e.get::<usize>("threads")? {
        Some(0) => return Err(e.invalid("threads", "must be >= 1")),
        t => t,
    };
    let output: PathBuf = e.or("output", PathBuf::from("out"))?;
    let emit_svg = match e.0.get("emit_svg") {
        None => false,
        Some(entry) => parse_bool(&entry.value).map_err(|r| e.invalid("emit_svg", r))?,
    };
    let snapshot_stride = e.or("snapshot_stride", 0)?;

    let mut cfg = RunConfig {
        command,
        spec,
        solver,
        delta0,
        n_points,
        n_max,
        r_min,
        r_max,
        n_r,
        r_list,
        alpha_min,
        alpha_max,
        n_alpha,
        threads,
        output,
        emit_svg,
        snapshot_stride,
        resolved: Vec::new(),
    };
    cfg.resolved = cfg.describe();
    Ok(cfg)
}

impl RunConfig {
    /// Effective value of every key, for the metadata block of outputs.
    pub fn describe(&self) -> Vec<(String, String)> {
        let s = &self.spec;
        let enc = &s.encoding;
        let base = match enc.excitation {
            memopat_core::Excitation::RatioQuadratic { .. } => "ratio_quadratic",
            memopat_core::Excitation::RatioLinear { .. } => "ratio_linear",
        };
        let opt = |v: Option<f64>| v.map_or_else(|| "auto".to_string(), |v| v.to_string());
        let mut out: Vec<(&str, String)> = vec![
            ("command", self.command.to_string()),
            ("d", s.d.to_string()),
            ("alpha", s.alpha.to_string()),
            ("R", s.radius.to_string()),
        ];
        match s.growth {
            GrowthModel::Logistic { rate, capacity } => out.extend([
                ("growth", "logistic".to_string()),
                ("growth_rate", rate.to_string()),
                ("capacity", capacity.to_string()),
            ]),
            GrowthModel::NoGrowth => out.push(("growth", "none".to_string())),
        }
        match enc.step {
            Some(_) => out.extend([
                ("encoding", "smooth_step".to_string()),
                ("base", base.to_string()),
            ]),
            None => out.push(("encoding", base.to_string())),
        }
        out.extend([
            ("rho", enc.excitation.rho().to_string()),
            ("mu", enc.mu.to_string()),
            ("beta", enc.beta.to_string()),
        ]);
        if let Some(step) = enc.step {
            out.extend([
                ("epsilon", step.epsilon.to_string()),
                ("gamma", step.gamma.to_string()),
            ]);
        }
        if let Some(u) = s.u_star_override {
            out.push(("u_star", u.to_string()));
        }
        let v = &self.solver;
        out.extend([
            ("n_cells", v.grid.n_cells().to_string()),
            ("dt", v.dt.to_string()),
            ("t_max", v.t_max.to_string()),
            ("steady_tol", v.steady_tol.to_string()),
            ("seed", v.seed.to_string()),
            ("perturb_amp", v.perturb_amp.to_string()),
            ("delta0", opt(self.delta0)),
            ("n_points", self.n_points.to_string()),
            ("n_max", self.n_max.to_string()),
            ("R_min", self.r_min.to_string()),
            ("R_max", self.r_max.to_string()),
            ("n_R", self.n_r.to_string()),
            (
                "R_list",
                self.r_list
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("alpha_min", opt(self.alpha_min)),
            ("alpha_max", opt(self.alpha_max)),
            ("n_alpha", self.n_alpha.to_string()),
            (
                "threads",
                self.threads
                    .map_or_else(|| "auto".to_string(), |t| t.to_string()),
            ),
            ("output", self.output.display().to_string()),
            ("emit_svg", self.emit_svg.to_string()),
            ("snapshot_stride", self.snapshot_stride.to_string()),
        ]);
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
