//! Run configuration: a flat `key = value` file merged under command-line
//! flags, validated into a [`RunConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use mcgraph_core::analysis::OriginalTime;
use mcgraph_core::engine::RecordMode;
use mcgraph_core::mass::{
    generalized_er, limit_params_er, limit_params_ger, limit_params_nr, quantile_masses, unit_masses, LimitParams,
    MassVector, QuantileSpec,
};

/// Bad input from the user; maps to exit status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Er,
    Ger,
    Nr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dist {
    Pareto,
    Exponential,
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Record {
    Full,
    Grid,
}

/// Flags shared by every command that builds a mass family. Each one can
/// also come from the `--config` file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Number of unit masses or quantile weights.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of perturbation masses (ger); defaults to floor(sqrt(n)).
    #[arg(long)]
    pub m: Option<usize>,
    /// Size of each perturbation mass (ger).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Weight distribution (nr).
    #[arg(long, value_enum)]
    pub dist: Option<Dist>,
    /// Pareto shape, must exceed 2.
    #[arg(long)]
    pub a: Option<f64>,
    /// Exponential rate.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Point-mass weight.
    #[arg(long)]
    pub w0: Option<f64>,
    /// Horizon in scaled time; must be below 1.
    #[arg(long)]
    pub c: Option<f64>,
    /// Number of equispaced grid points in (0, c].
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub record: Option<Record>,
    /// Permit c >= 1.
    #[arg(long)]
    pub allow_critical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub theta: f64,
    pub dist: Dist,
    pub a: f64,
    pub lambda: f64,
    pub w0: f64,
    pub c: f64,
    pub grid: usize,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub record: Record,
    pub allow_critical: bool,
}

const KEYS: &[&str] = &[
    "family",
    "n",
    "m",
    "theta",
    "dist",
    "a",
    "lambda",
    "w0",
    "c",
    "grid",
    "reps",
    "seed",
    "workers",
    "out",
    "record",
    "allow-critical",
];

pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("config line {}: expected `key = value`", i + 1));
        };
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return usage(format!("config line {}: unknown key `{}`", i + 1, k.trim()));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn from_file<T: std::str::FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match file.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .or_else(|_| usage(format!("config key `{key}`: cannot parse `{v}`"))),
    }
}

fn enum_from_file<T: ValueEnum>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match file.get(key) {
        None => Ok(None),
        Some(v) => T::from_str(v, true)
            .map(Some)
            .or_else(|_| usage(format!("config key `{key}`: invalid value `{v}`"))),
    }
}

impl RunArgs {
    /// Merges the config file under the flags and validates the result.
    pub fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        macro_rules! pick {
            ($field:ident, $key:expr, $default:expr) => {
                match self.$field.clone() {
                    Some(v) => v,
                    None => from_file(&file, $key)?.unwrap_or($default),
                }
            };
        }
        macro_rules! pick_enum {
            ($field:ident, $key:expr, $default:expr) => {
                match self.$field {
                    Some(v) => v,
                    None => enum_from_file(&file, $key)?.unwrap_or($default),
                }
            };
        }
        let n = pick!(n, "n", 1000);
        let cfg = RunConfig {
            family: pick_enum!(family, "family", Family::Er),
            n,
            m: pick!(m, "m", (n as f64).sqrt().floor() as usize),
            theta: pick!(theta, "theta", 2.0),
            dist: pick_enum!(dist, "dist", Dist::Pareto),
            a: pick!(a, "a", 3.0),
            lambda: pick!(lambda, "lambda", 1.0),
            w0: pick!(w0, "w0", 1.0),
            c: pick!(c, "c", 0.9),
            grid: pick!(grid, "grid", 10),
            reps: pick!(reps, "reps", 100),
            seed: pick!(seed, "seed", 1),
            workers: pick!(workers, "workers", 0),
            out: pick!(out, "out", PathBuf::from("out")),
            record: pick_enum!(record, "record", Record::Grid),
            allow_critical: self.allow_critical || from_file(&file, "allow-critical")?.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return usage(format!("n must be at least 2, got {}", self.n));
        }
        if self.reps < 1 {
            return usage("reps must be at least 1");
        }
        if self.grid < 1 {
            return usage("grid must have at least one point");
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return usage(format!("c must be positive, got {}", self.c));
        }
        if self.c >= 1.0 && !self.allow_critical {
            return usage(format!(
                "c = {} is outside the sub-critical window [0, 1); pass --allow-critical to run anyway",
                self.c
            ));
        }
        Ok(())
    }

    pub fn quantile_spec(&self) -> Result<QuantileSpec> {
        let spec = match self.dist {
            Dist::Pareto => QuantileSpec::pareto(self.a),
            Dist::Exponential => QuantileSpec::exponential(self.lambda),
            Dist::Point => QuantileSpec::point_mass(self.w0),
        };
        spec.or_else(|e| usage(e.to_string()))
    }

    pub fn thetas(&self) -> Vec<f64> {
        vec![self.theta; self.m]
    }

    pub fn masses(&self) -> Result<MassVector> {
        let mv = match self.family {
            Family::Er => unit_masses(self.n),
            Family::Ger => generalized_er(self.n, &self.thetas()),
            Family::Nr => quantile_masses(self.n, &self.quantile_spec()?),
        };
        mv.or_else(|e| usage(e.to_string()))
    }

    pub fn params(&self) -> Result<LimitParams> {
        let p = match self.family {
            Family::Er => Ok(limit_params_er(self.n)),
            Family::Ger => limit_params_ger(self.n, &self.thetas()),
            Family::Nr => limit_params_nr(self.n, &self.quantile_spec()?),
        };
        p.or_else(|e| usage(e.to_string()))
    }

    pub fn original_time(&self) -> Result<OriginalTime> {
        Ok(OriginalTime(self.params()?))
    }

    /// `grid` equispaced scaled times in `(0, c]`.
    pub fn scaled_grid(&self) -> Vec<f64> {
        (1..=self.grid).map(|i| self.c * i as f64 / self.grid as f64).collect()
    }

    /// Horizon in process time.
    pub fn horizon(&self) -> Result<f64> {
        Ok(self.params()?.process_time(self.c))
    }

    pub fn record_mode(&self) -> Result<RecordMode> {
        Ok(match self.record {
            Record::Full => RecordMode::Full,
            Record::Grid => {
                let p = self.params()?;
                RecordMode::Grid(self.scaled_grid().iter().map(|&t| p.process_time(t)).collect())
            }
        })
    }

    /// Canonical `key=value` lines for every setting that affects results;
    /// worker count and output location are excluded.
    pub fn canonical(&self) -> String {
        let mut lines = vec![
            format!("family={:?}", self.family).to_lowercase(),
            format!("n={}", self.n),
        ];
        match self.family {
            Family::Er => {}
            Family::Ger => {
                lines.push(format!("m={}", self.m));
                lines.push(format!("theta={}", self.theta));
            }
            Family::Nr => {
                lines.push(format!("dist={:?}", self.dist).to_lowercase());
                match self.dist {
                    Dist::Pareto => lines.push(format!("a={}", self.a)),
                    Dist::Exponential => lines.push(format!("lambda={}", self.lambda)),
                    Dist::Point => lines.push(format!("w0={}", self.w0)),
                }
            }
        }
        lines.push(format!("c={}", self.c));
        lines.push(format!("grid={}", self.grid));
        lines.push(format!("reps={}", self.reps));
        lines.push(format!("seed={}", self.seed));
        lines.push(format!("record={:?}", self.record).to_lowercase());
        lines.join("\n")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }
}
