use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{BinarizationRule, FilterRule};
use crate::error::{Error, Result};
use crate::features::DEFAULT_COMPONENTS;
use crate::matching::{default_demographics, MatchLevel};

pub const MIN_REPLICATES: usize = 100;

fn default_delimiter() -> char {
    ','
}

fn default_output() -> PathBuf {
    PathBuf::from("audit-out")
}

fn default_pca_k() -> usize {
    DEFAULT_COMPONENTS
}

fn default_levels() -> Vec<String> {
    MatchLevel::LADDER.iter().map(|l| l.to_string()).collect()
}

fn default_bootstrap() -> usize {
    2000
}

fn default_ratio() -> f64 {
    0.75
}

/// Everything a full audit run needs. Read from TOML; relative paths are
/// resolved against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    /// Companion feature table keyed by row id.
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_pca_k")]
    pub pca_k: usize,
    #[serde(default = "default_ratio")]
    pub train_ratio: f64,
    #[serde(default)]
    pub filters: Vec<FilterRule>,
    /// Overrides of the default binarization (median split / top two levels).
    #[serde(default)]
    pub binarization: Vec<BinarizationRule>,
    /// Continuous covariates imputed by regression instead of the median.
    #[serde(default)]
    pub regression_impute: Vec<String>,
    #[serde(default = "default_levels")]
    pub match_levels: Vec<String>,
    #[serde(default = "default_demographics")]
    pub demographics: Vec<String>,
    #[serde(default)]
    pub caliper: Option<f64>,
    /// Variable used to stratify the association tests.
    #[serde(default)]
    pub device_variable: Option<String>,
    /// Binary screen targets; all PT and HP covariates plus the outcome when empty.
    #[serde(default)]
    pub screen_targets: Vec<String>,
    /// Continuous screen targets; all continuous PT and HP covariates when empty.
    #[serde(default)]
    pub regression_targets: Vec<String>,
}

impl AuditConfig {
    /// A config with defaults for everything but the inputs.
    pub fn new(data: impl Into<PathBuf>, schema: impl Into<PathBuf>) -> Self {
        Self {
            data: data.into(),
            schema: schema.into(),
            features: None,
            delimiter: default_delimiter(),
            output_dir: default_output(),
            seed: 0,
            bootstrap: default_bootstrap(),
            pca_k: default_pca_k(),
            train_ratio: default_ratio(),
            filters: Vec::new(),
            binarization: Vec::new(),
            regression_impute: Vec::new(),
            match_levels: default_levels(),
            demographics: default_demographics(),
            caliper: None,
            device_variable: None,
            screen_targets: Vec::new(),
            regression_targets: Vec::new(),
        }
    }

    /// Parses TOML text, resolving relative paths against `base`. Does not
    /// touch the file system; call [`AuditConfig::validate`] for that.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: AuditConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.data);
        resolve(&mut cfg.schema);
        if let Some(f) = cfg.features.as_mut() {
            resolve(f);
        }
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let cfg = Self::from_toml_str(&text, base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn match_levels(&self) -> Result<Vec<MatchLevel>> {
        self.match_levels.iter().map(|s| s.parse()).collect()
    }

    pub fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| Error::Config(format!("delimiter `{}` is not a single ASCII byte", self.delimiter)))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        let mut inputs = vec![("data", &self.data), ("schema", &self.schema)];
        if let Some(f) = &self.features {
            inputs.push(("features", f));
        }
        for (what, p) in inputs {
            if !p.is_file() {
                return cfg(format!("{what} file {} does not exist", p.display()));
            }
        }
        if self.bootstrap < MIN_REPLICATES {
            return cfg(format!(
                "bootstrap must be at least {MIN_REPLICATES}, got {}",
                self.bootstrap
            ));
        }
        if self.pca_k == 0 {
            return cfg("pca_k must be positive".into());
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return cfg(format!("train_ratio {} not in (0, 1)", self.train_ratio));
        }
        if let Some(c) = self.caliper {
            if !(c >= 0.0) {
                return cfg(format!("caliper {c} must be non-negative"));
            }
        }
        self.delimiter_byte()?;
        self.match_levels().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}
