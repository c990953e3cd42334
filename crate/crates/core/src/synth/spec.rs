use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Group, Kind};
use crate::error::{Error, Result};

/// One generated covariate.
///
/// `effect` is its log-odds contribution to the outcome and `leak` the shift
/// it causes in feature space, in units of the feature noise sd. Continuous
/// covariates act through their standardized value; categorical covariates
/// through the level index scaled to [0, 1] (effect) and a separate feature
/// direction per non-reference level (leak).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    pub kind: Kind,
    pub group: Group,
    #[serde(default)]
    pub effect: f64,
    #[serde(default)]
    pub leak: f64,
    #[serde(default)]
    pub missing_rate: f64,
    /// Binary: probability of 1.
    #[serde(default)]
    pub frequency: Option<f64>,
    #[serde(default)]
    pub mean: Option<f64>,
    #[serde(default)]
    pub sd: Option<f64>,
    #[serde(default)]
    pub levels: Vec<String>,
    /// Categorical level weights; uniform when empty.
    #[serde(default)]
    pub weights: Vec<f64>,
}

impl CovariateSpec {
    pub fn binary(name: &str, group: Group, frequency: f64, effect: f64, leak: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: Kind::Binary,
            group,
            effect,
            leak,
            missing_rate: 0.0,
            frequency: Some(frequency),
            mean: None,
            sd: None,
            levels: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn continuous(name: &str, group: Group, mean: f64, sd: f64, effect: f64, leak: f64) -> Self {
        Self {
            kind: Kind::Continuous,
            frequency: None,
            mean: Some(mean),
            sd: Some(sd),
            ..Self::binary(name, group, 0.0, effect, leak)
        }
    }

    pub fn categorical(name: &str, group: Group, levels: &[&str], effect: f64, leak: f64) -> Self {
        Self {
            kind: Kind::Categorical,
            frequency: None,
            levels: levels.iter().map(|s| s.to_string()).collect(),
            ..Self::binary(name, group, 0.0, effect, leak)
        }
    }

    pub fn with_missing(mut self, rate: f64) -> Self {
        self.missing_rate = rate;
        self
    }

    /// Number of feature directions this covariate's leak occupies.
    pub(crate) fn leak_width(&self) -> usize {
        if self.leak == 0.0 {
            0
        } else if self.kind == Kind::Categorical {
            self.levels.len() - 1
        } else {
            1
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("covariate `{}`: {msg}", self.name)));
        if !matches!(self.group, Group::Pt | Group::Hp | Group::Meta) {
            return bad("group must be PT, HP or META");
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad("missing_rate must be in [0, 1)");
        }
        if !self.effect.is_finite() || !(self.leak >= 0.0 && self.leak.is_finite()) {
            return bad("effect must be finite and leak finite and non-negative");
        }
        match self.kind {
            Kind::Binary => match self.frequency {
                Some(f) if f > 0.0 && f < 1.0 => Ok(()),
                _ => bad("binary covariates need frequency in (0, 1)"),
            },
            Kind::Continuous => match (self.mean, self.sd) {
                (Some(m), Some(s)) if m.is_finite() && s > 0.0 => Ok(()),
                _ => bad("continuous covariates need a mean and a positive sd"),
            },
            Kind::Categorical => {
                if self.levels.len() < 2 {
                    return bad("categorical covariates need at least two levels");
                }
                if !self.weights.is_empty()
                    && (self.weights.len() != self.levels.len() || self.weights.iter().any(|w| !(*w > 0.0)))
                {
                    return bad("weights must be positive, one per level");
                }
                Ok(())
            }
        }
    }

    /// Level probabilities for categorical covariates.
    pub(crate) fn level_weights(&self) -> Vec<f64> {
        let w = if self.weights.is_empty() {
            vec![1.0; self.levels.len()]
        } else {
            self.weights.clone()
        };
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }
}

fn default_outcome() -> String {
    "fracture".into()
}

fn default_patient_sd() -> f64 {
    0.2
}

/// Generative model of a confounded dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfoundSpec {
    pub n_patients: usize,
    /// Inclusive range of rows drawn per patient.
    pub rows_per_patient: (usize, usize),
    pub prevalence: f64,
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub direct_signal: f64,
    pub feature_dim: usize,
    pub noise_sd: f64,
    #[serde(default = "default_outcome")]
    pub outcome: String,
    /// sd of the per-patient random intercept on the log-odds scale.
    #[serde(default = "default_patient_sd")]
    pub patient_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ConfoundSpec {
    pub fn new(n_patients: usize, prevalence: f64, feature_dim: usize, seed: u64) -> Self {
        Self {
            n_patients,
            rows_per_patient: (1, 1),
            prevalence,
            covariates: Vec::new(),
            direct_signal: 0.0,
            feature_dim,
            noise_sd: 1.0,
            outcome: default_outcome(),
            patient_sd: default_patient_sd(),
            seed,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: ConfoundSpec = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Feature directions used: one for the direct signal plus the leaks.
    pub fn direction_count(&self) -> usize {
        1 + self.covariates.iter().map(CovariateSpec::leak_width).sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.n_patients == 0 {
            return cfg("n_patients must be positive".into());
        }
        let (lo, hi) = self.rows_per_patient;
        if lo == 0 || lo > hi {
            return cfg(format!("rows_per_patient ({lo}, {hi}) must satisfy 1 <= min <= max"));
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return cfg(format!("prevalence {} not in (0, 1)", self.prevalence));
        }
        if self.feature_dim == 0 {
            return cfg("feature_dim must be at least 1".into());
        }
        if !(self.noise_sd > 0.0) || !(self.direct_signal >= 0.0) || !(self.patient_sd >= 0.0) {
            return cfg("noise_sd must be positive; direct_signal and patient_sd non-negative".into());
        }
        if self.direction_count() > self.feature_dim {
            return cfg(format!(
                "feature_dim {} too small for {} planted directions",
                self.feature_dim,
                self.direction_count()
            ));
        }
        let mut names = std::collections::HashSet::new();
        names.insert(self.outcome.as_str());
        for c in &self.covariates {
            c.validate()?;
            if !names.insert(c.name.as_str()) {
                return cfg(format!("duplicate variable name `{}`", c.name));
            }
        }
        Ok(())
    }
}
