//! Run configuration: a TOML file, then environment overrides for the
//! service endpoints, then command-line flags.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

pub const ENV_NER_ENDPOINT: &str = "BACTINT_NER_ENDPOINT";
pub const ENV_SCORE_ENDPOINT: &str = "BACTINT_SCORE_ENDPOINT";
pub const ENV_SEARCH_ENDPOINT: &str = "BACTINT_SEARCH_ENDPOINT";

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_RUNS: usize = 3;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.85;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: cannot read config: {source}")]
    Unreadable { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{origin}: {message}")]
    Invalid { origin: String, message: String },
}

impl ConfigError {
    /// Process exit status for this class of error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Unreadable { .. } => 3,
            ConfigError::Malformed { .. } => 4,
            ConfigError::Invalid { .. } => 5,
        }
    }
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub gazetteer: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    /// Baseline weights written by `baseline train --save`.
    pub model: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoints {
    pub ner: Option<String>,
    pub score: Option<String>,
    pub search: Option<String>,
    /// Allow live literature search; off unless set.
    #[serde(default)]
    pub online: bool,
    pub timeout_secs: Option<u64>,
}

/// The config file as written.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub threshold: Option<f64>,
    pub train_fraction: Option<f64>,
    pub fetch_cap: Option<usize>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub endpoints: Endpoints,
}

/// Values settable from the command line; `None` leaves the config alone.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub threshold: Option<f64>,
    pub train_fraction: Option<f64>,
    pub fetch_cap: Option<usize>,
    pub workers: Option<usize>,
    pub ner_endpoint: Option<String>,
    pub score_endpoint: Option<String>,
    pub online: bool,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub runs: usize,
    pub threshold: f64,
    pub train_fraction: f64,
    pub fetch_cap: usize,
    pub workers: usize,
    pub paths: Paths,
    pub ner_endpoint: Option<String>,
    pub score_endpoint: Option<String>,
    pub search_endpoint: Option<String>,
    pub online: bool,
    pub timeout: Duration,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Unreadable { path: path.into(), source })?;
        let mut config: Config =
            toml::from_str(&text).map_err(|e| ConfigError::Malformed { path: path.into(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let paths = &mut config.paths;
        for p in [&mut paths.gazetteer, &mut paths.abbreviations, &mut paths.cache_dir, &mut paths.model]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

fn invalid(origin: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { origin: origin.to_string(), message: message.into() }
}

fn check_endpoint(origin: &str, url: Option<String>) -> Result<Option<String>, ConfigError> {
    match url {
        Some(u) if u.is_empty() => Ok(None),
        Some(u) if !(u.starts_with("http://") || u.starts_with("https://")) => {
            Err(invalid(origin, format!("endpoint {u:?} must start with http:// or https://")))
        }
        other => Ok(other),
    }
}

/// Merge config, environment and flags (later wins) and validate.
pub fn resolve(config: Config, flags: Overrides, origin: &str) -> Result<Settings, ConfigError> {
    let env_var = |k: &str| env::var(k).ok();
    let pick_endpoint =
        |flag: Option<String>, var: &str, file: Option<String>| -> Result<Option<String>, ConfigError> {
            if flag.is_some() {
                return check_endpoint("command line", flag);
            }
            if let Some(v) = env_var(var) {
                return check_endpoint(var, Some(v));
            }
            check_endpoint(origin, file)
        };
    let settings = Settings {
        seed: flags.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
        runs: flags.runs.or(config.runs).unwrap_or(DEFAULT_RUNS),
        threshold: flags.threshold.or(config.threshold).unwrap_or(bactint::classify::DEFAULT_THRESHOLD),
        train_fraction: flags.train_fraction.or(config.train_fraction).unwrap_or(DEFAULT_TRAIN_FRACTION),
        fetch_cap: flags.fetch_cap.or(config.fetch_cap).unwrap_or(bactint::casestudy::DEFAULT_FETCH_CAP),
        workers: flags.workers.or(config.workers).unwrap_or(1),
        ner_endpoint: pick_endpoint(flags.ner_endpoint, ENV_NER_ENDPOINT, config.endpoints.ner)?,
        score_endpoint: pick_endpoint(flags.score_endpoint, ENV_SCORE_ENDPOINT, config.endpoints.score)?,
        search_endpoint: pick_endpoint(None, ENV_SEARCH_ENDPOINT, config.endpoints.search)?,
        online: flags.online || config.endpoints.online,
        timeout: Duration::from_secs(config.endpoints.timeout_secs.unwrap_or(30)),
        paths: config.paths,
    };
    if !(settings.threshold > 0.0 && settings.threshold < 1.0) {
        return Err(invalid(origin, format!("threshold {} must lie strictly between 0 and 1", settings.threshold)));
    }
    if !(settings.train_fraction > 0.0 && settings.train_fraction < 1.0) {
        return Err(invalid(
            origin,
            format!("train_fraction {} must lie strictly between 0 and 1", settings.train_fraction),
        ));
    }
    if settings.runs < 2 {
        return Err(invalid(origin, format!("runs is {}; mean ± std needs at least 2", settings.runs)));
    }
    if settings.fetch_cap == 0 || settings.workers == 0 {
        return Err(invalid(origin, "fetch_cap and workers must be positive"));
    }
    if settings.timeout.is_zero() {
        return Err(invalid(origin, "timeout_secs must be positive"));
    }
    Ok(settings)
}
