//! Flat `key = value` experiment configs.
//!
//! Grammar: UTF-8 text, one `key = value` pair per line, `#` starts a
//! comment line, blank lines are ignored, list values are comma separated.
//! Keys are case-sensitive and may appear at most once.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::altproj::{AltProjConfig, Projection, TestFunction};
use crate::error::{Error, Result};
use crate::sampling::{PointDomain, SamplingScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Varm,
    Varr,
    Varn,
    Bounds,
    Single,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Varm => "varm",
            ExperimentKind::Varr => "varr",
            ExperimentKind::Varn => "varn",
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::Single => "single",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "varm" => Ok(ExperimentKind::Varm),
            "varr" => Ok(ExperimentKind::Varr),
            "varn" => Ok(ExperimentKind::Varn),
            "bounds" => Ok(ExperimentKind::Bounds),
            "single" => Ok(ExperimentKind::Single),
            other => Err(Error::Parse(format!("unknown experiment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    AltProj,
    TsvdBaseline,
    Taylor,
    Rff,
    Tt,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::AltProj => "altproj",
            Algorithm::TsvdBaseline => "tsvd_baseline",
            Algorithm::Taylor => "taylor",
            Algorithm::Rff => "rff",
            Algorithm::Tt => "tt",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "altproj" => Ok(Algorithm::AltProj),
            "tsvd_baseline" => Ok(Algorithm::TsvdBaseline),
            "taylor" => Ok(Algorithm::Taylor),
            "rff" => Ok(Algorithm::Rff),
            "tt" => Ok(Algorithm::Tt),
            other => Err(Error::Parse(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Everything one `experiment` run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub function: TestFunction,
    pub scheme: SamplingScheme,
    pub domain: PointDomain,
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub r: Vec<usize>,
    pub trials: usize,
    pub seed: Option<u64>,
    /// Target error of the constructive algorithms and of the bound table.
    pub eps: f64,
    /// Taylor order of the constructive algorithms; `ceil(ln(1/eps))` when unset.
    pub order: Option<usize>,
    /// Requested algorithms; the truncated-SVD baseline rides along with
    /// every matrix `altproj` run.
    pub algorithms: Vec<Algorithm>,
    pub solver: AltProjConfig,
    pub output: Option<PathBuf>,
    /// Fill the `wall_time_s` column. Off by default so identical configs
    /// give byte-identical files.
    pub timing: bool,
    pub jobs: Option<usize>,
    /// Growth constants for the bound table; taken from the function when unset.
    pub growth_c: Option<f64>,
    pub growth_m: Option<f64>,
    /// LVM constants; `C^2 m^m` when unset.
    pub cu: Option<f64>,
    pub cv: Option<f64>,
    pub beta2: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Single,
            function: TestFunction::F1,
            scheme: SamplingScheme::Symmetric,
            domain: PointDomain::Ball,
            n: vec![400],
            m: vec![10],
            r: vec![10],
            trials: 5,
            seed: None,
            eps: 0.1,
            order: None,
            algorithms: vec![Algorithm::AltProj],
            solver: AltProjConfig {
                max_iters: 1000,
                tol: 0.05,
                bisection_steps: 10,
                restarts: 0,
                projection: Projection::Subspace { oversample: 10, power_iters: 1 },
                ..AltProjConfig::default()
            },
            output: None,
            timing: false,
            jobs: None,
            growth_c: None,
            growth_m: None,
            cu: None,
            cv: None,
            beta2: None,
        }
    }
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parse(format!("bad value {value:?} for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse_one(key, v)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Parse(format!("bad boolean {other:?} for `{key}`"))),
    }
}

/// Every key [`ExperimentConfig::set`] accepts.
pub const KEYS: &[&str] = &[
    "experiment",
    "function",
    "scheme",
    "domain",
    "n",
    "m",
    "r",
    "trials",
    "seed",
    "eps",
    "order",
    "algorithms",
    "max_iters",
    "tol",
    "bisection_steps",
    "restarts",
    "projection",
    "output",
    "timing",
    "jobs",
    "growth_c",
    "growth_m",
    "cu",
    "cv",
    "beta2",
];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            cfg.set(key, value).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Assign one key from its textual value (also used for CLI overrides).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "experiment" => self.experiment = value.parse()?,
            "function" => self.function = value.parse()?,
            "scheme" => self.scheme = value.parse()?,
            "domain" => self.domain = value.parse()?,
            "n" => self.n = parse_list(key, value)?,
            "m" => self.m = parse_list(key, value)?,
            "r" => self.r = parse_list(key, value)?,
            "trials" => self.trials = parse_one(key, value)?,
            "seed" => self.seed = Some(parse_one(key, value)?),
            "eps" => self.eps = parse_one(key, value)?,
            "order" => self.order = Some(parse_one(key, value)?),
            "algorithms" => {
                self.algorithms = value.split(',').map(str::parse).collect::<Result<Vec<Algorithm>>>()?
            }
            "max_iters" => self.solver.max_iters = parse_one(key, value)?,
            "tol" => self.solver.tol = parse_one(key, value)?,
            "bisection_steps" => self.solver.bisection_steps = parse_one(key, value)?,
            "restarts" => self.solver.restarts = parse_one(key, value)?,
            "projection" => self.solver.projection = value.parse()?,
            "output" => self.output = Some(PathBuf::from(value)),
            "timing" => self.timing = parse_bool(key, value)?,
            "jobs" => self.jobs = Some(parse_one(key, value)?),
            "growth_c" => self.growth_c = Some(parse_one(key, value)?),
            "growth_m" => self.growth_m = Some(parse_one(key, value)?),
            "cu" => self.cu = Some(parse_one(key, value)?),
            "cv" => self.cv = Some(parse_one(key, value)?),
            "beta2" => self.beta2 = Some(parse_one(key, value)?),
            other => return Err(Error::Parse(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            return Err(Error::invalid("a seed is required"));
        }
        for (name, grid) in [("n", &self.n), ("m", &self.m), ("r", &self.r)] {
            if grid.is_empty() || grid.contains(&0) {
                return Err(Error::invalid(format!("grid `{name}` must be nonempty and positive")));
            }
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if self.order == Some(0) {
            return Err(Error::invalid("order must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("no algorithms requested"));
        }
        if self.algorithms.contains(&Algorithm::TsvdBaseline) {
            return Err(Error::invalid("tsvd_baseline is emitted with altproj, not requested on its own"));
        }
        if self.jobs == Some(0) {
            return Err(Error::invalid("jobs must be at least 1"));
        }
        self.solver.validate()?;
        let varied = match self.experiment {
            ExperimentKind::Varm => Some("m"),
            ExperimentKind::Varr => Some("r"),
            ExperimentKind::Varn => Some("n"),
            ExperimentKind::Single => None,
            // The bound table sweeps n for one m; r is unused.
            ExperimentKind::Bounds => {
                if self.m.len() != 1 {
                    return Err(Error::invalid("the bound table takes a single m"));
                }
                return Ok(());
            }
        };
        for (name, grid) in [("n", &self.n), ("m", &self.m), ("r", &self.r)] {
            if Some(name) != varied && grid.len() != 1 {
                return Err(Error::invalid(format!(
                    "experiment {} varies only {}, but grid `{name}` has {} values",
                    self.experiment,
                    varied.unwrap_or("nothing"),
                    grid.len()
                )));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::invalid("a seed is required"))
    }
}
