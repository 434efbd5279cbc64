//! Configuration resolution: built-in defaults, overridden by a flat
//! `key = value` config file, overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use popmc_core::{GeneratorKind, PrecisionMode};

use crate::CliError;

/// Keys accepted in config files; anything else is rejected so typos fail
/// loudly instead of silently using a default.
const KNOWN_KEYS: &[&str] = &[
    "seed",
    "workers",
    "precision",
    "generator",
    "out-dir",
    "n",
    "chains",
    "iterations",
    "burn-in",
    "rwm-scale",
    "particles",
    "temperatures",
    "mcmc-steps",
    "ess-threshold",
    "resampler",
    "data",
    "data-seed",
    "model",
    "m",
    "sigma",
    "steps",
    "experiment",
    "sizes",
    "workers-list",
    "reps",
];

/// Parsed config file contents.
#[derive(Clone, Debug, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("config file {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{origin}:{}: expected 'key = value', got '{line}'",
                    lineno + 1
                ))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "{origin}:{}: unknown config key '{key}'",
                    lineno + 1
                )));
            }
            values.insert(key, value);
        }
        Ok(ConfigMap { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// One resolved setting source: command-line flag beats config file beats
/// default.
pub struct Resolver<'a> {
    config: &'a ConfigMap,
}

impl<'a> Resolver<'a> {
    pub fn new(config: &'a ConfigMap) -> Self {
        Resolver { config }
    }

    pub fn parsed<V: FromStr>(&self, key: &str, flag: Option<V>, default: V) -> Result<V, CliError>
    where
        V::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.config.get(key) {
            Some(raw) => raw
                .parse::<V>()
                .map_err(|e| CliError::Config(format!("config key '{key}': {e}"))),
            None => Ok(default),
        }
    }

    pub fn path(&self, key: &str, flag: Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| self.config.get(key).map(PathBuf::from))
    }
}

/// Settings shared by every experiment.
#[derive(Clone, Debug)]
pub struct CommonSettings {
    pub seed: u64,
    pub workers: usize,
    pub precision: PrecisionMode,
    pub generator: GeneratorKind,
    pub out_dir: PathBuf,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[derive(Clone, Debug, Default)]
pub struct CommonFlags {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub precision: Option<String>,
    pub generator: Option<String>,
    pub out_dir: Option<PathBuf>,
}

pub fn resolve_common(
    flags: &CommonFlags,
    config: &ConfigMap,
) -> Result<CommonSettings, CliError> {
    let r = Resolver::new(config);
    let seed = r.parsed("seed", flags.seed, 12345u64)?;
    let workers = r.parsed("workers", flags.workers, default_workers())?;
    if workers == 0 {
        return Err(CliError::Config("workers must be positive".into()));
    }
    let precision_raw = r.parsed(
        "precision",
        flags.precision.clone(),
        "double".to_string(),
    )?;
    let precision = precision_raw
        .parse::<PrecisionMode>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let generator_raw = r.parsed(
        "generator",
        flags.generator.clone(),
        "mrg32k3a".to_string(),
    )?;
    let generator = generator_raw
        .parse::<GeneratorKind>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let out_dir = r
        .path("out-dir", flags.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(CommonSettings {
        seed,
        workers,
        precision,
        generator,
        out_dir,
    })
}

/// Canonical key-value view of a fully resolved experiment configuration;
/// feeds both the manifest and its hash.
pub fn canonical_settings(
    experiment: &str,
    common: &CommonSettings,
    extra: &[(&str, String)],
) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    map.insert("experiment".to_string(), experiment.to_string());
    map.insert("seed".to_string(), common.seed.to_string());
    map.insert("workers".to_string(), common.workers.to_string());
    map.insert("precision".to_string(), common.precision.to_string());
    map.insert("generator".to_string(), common.generator.to_string());
    map.insert(
        "out-dir".to_string(),
        common.out_dir.display().to_string(),
    );
    for (k, v) in extra {
        map.insert((*k).to_string(), v.clone());
    }
    map
}
