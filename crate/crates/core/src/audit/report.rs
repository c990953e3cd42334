use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{RegressionRow, ScreenRow};
use crate::stats::{AssociationResult, CurvePoint, OperatingPoint, PrcPoint};

/// Share of observed positives of one binary variable within one cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicRow {
    pub cohort: String,
    pub variable: String,
    pub n_rows: usize,
    pub n_observed: usize,
    pub n_positive: usize,
    #[serde(with = "crate::serde_float")]
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRow {
    /// `all`, or `{device}={level}` for a device stratum.
    pub stratum: String,
    pub covariate: String,
    pub a: Option<u64>,
    pub b: Option<u64>,
    pub c: Option<u64>,
    pub d: Option<u64>,
    pub odds_ratio: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
}

impl AssociationRow {
    pub fn new(stratum: &str, covariate: &str, result: Option<AssociationResult>, alpha: f64) -> Self {
        let t = result.map(|r| r.table);
        Self {
            stratum: stratum.to_string(),
            covariate: covariate.to_string(),
            a: t.map(|t| t.a),
            b: t.map(|t| t.b),
            c: t.map(|t| t.c),
            d: t.map(|t| t.d),
            odds_ratio: result.map(|r| r.odds_ratio).filter(|v| v.is_finite()),
            p_value: result.map(|r| r.p_value),
            significant: result.is_some_and(|r| r.p_value < alpha),
        }
    }
}

/// Classifier performance on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRow {
    /// Cohort label on the matching ladder, or model label for predictor sets.
    pub label: String,
    pub n_cases: usize,
    pub n_controls: usize,
    pub auc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub auprc: f64,
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
    #[serde(with = "crate::serde_float")]
    pub sensitivity: f64,
    #[serde(with = "crate::serde_float")]
    pub specificity: f64,
    #[serde(with = "crate::serde_float")]
    pub accuracy: f64,
    #[serde(with = "crate::serde_float")]
    pub ppv: f64,
    #[serde(with = "crate::serde_float")]
    pub npv: f64,
    pub tn: u64,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    /// Ridge strength selected for the model; empty for NB ensembles.
    pub lambda: Option<f64>,
    /// Unpaired bootstrap p-value against the cross-sectional cohort
    /// (ladder rows only).
    pub p_vs_cross_sectional: Option<f64>,
    /// Covariates significantly associated with the outcome in this cohort
    /// (ladder rows only).
    pub significant_covariates: Option<usize>,
    /// Cases left without a control (ladder rows only).
    pub unmatched_cases: Option<usize>,
}

impl PerformanceRow {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        label: &str,
        n_cases: usize,
        n_controls: usize,
        auc: f64,
        ci: (f64, f64),
        auprc: f64,
        op: &OperatingPoint,
        lambda: Option<f64>,
    ) -> Self {
        Self {
            label: label.to_string(),
            n_cases,
            n_controls,
            auc,
            ci_low: ci.0,
            ci_high: ci.1,
            auprc,
            threshold: op.threshold,
            sensitivity: op.sensitivity,
            specificity: op.specificity,
            accuracy: op.accuracy,
            ppv: op.ppv,
            npv: op.npv,
            tn: op.tn,
            tp: op.tp,
            fn_: op.fn_,
            fp: op.fp,
            lambda,
            p_vs_cross_sectional: None,
            significant_covariates: None,
            unmatched_cases: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model_a: String,
    pub model_b: String,
    pub auc_a: f64,
    pub auc_b: f64,
    pub delta: f64,
    pub p_value: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaRow {
    pub component: usize,
    pub explained_variance: f64,
    pub explained_fraction: f64,
    pub cumulative_fraction: f64,
}

/// ROC and precision-recall points of one evaluated score set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    /// `ladder` or `predictors`.
    pub panel: String,
    pub label: String,
    pub roc: Vec<CurvePoint>,
    pub prc: Vec<PrcPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub master_seed: u64,
    /// Sub-seed of every stage, keyed by stage label.
    pub stage_seeds: BTreeMap<String, u64>,
    /// SHA-256 of every input file.
    pub input_digests: BTreeMap<String, String>,
    pub bootstrap: usize,
    pub train_ratio: f64,
    pub pca_k: usize,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub stages_completed: Vec<String>,
    pub complete: bool,
    pub failed_stage: Option<String>,
    pub failure: Option<String>,
    pub warnings: Vec<String>,
}

/// All tables produced by one audit run. Tables of stages that did not run
/// are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub metadata: RunMetadata,
    pub characteristics: Vec<CharacteristicRow>,
    pub pca: Vec<PcaRow>,
    pub screen_binary: Vec<ScreenRow>,
    pub screen_continuous: Vec<RegressionRow>,
    pub associations: Vec<AssociationRow>,
    pub balance: Vec<AssociationRow>,
    pub ladder: Vec<PerformanceRow>,
    pub predictors: Vec<PerformanceRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub curves: Vec<CurveSet>,
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    // Written explicitly so empty tables still carry their columns.
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub const CHARACTERISTIC_COLUMNS: &[&str] = &["cohort", "variable", "n_rows", "n_observed", "n_positive", "fraction"];
pub const PCA_COLUMNS: &[&str] = &[
    "component",
    "explained_variance",
    "explained_fraction",
    "cumulative_fraction",
];
pub const SCREEN_COLUMNS: &[&str] = &[
    "target", "auc", "ci_low", "ci_high", "lambda", "n_train", "n_test", "status",
];
pub const REGRESSION_COLUMNS: &[&str] = &["target", "r_squared", "rmse", "n_train", "n_test", "status"];
pub const ASSOCIATION_COLUMNS: &[&str] = &[
    "stratum",
    "covariate",
    "a",
    "b",
    "c",
    "d",
    "odds_ratio",
    "p_value",
    "significant",
];
pub const PERFORMANCE_COLUMNS: &[&str] = &[
    "label",
    "n_cases",
    "n_controls",
    "auc",
    "ci_low",
    "ci_high",
    "auprc",
    "threshold",
    "sensitivity",
    "specificity",
    "accuracy",
    "ppv",
    "npv",
    "tn",
    "tp",
    "fn",
    "fp",
    "lambda",
    "p_vs_cross_sectional",
    "significant_covariates",
    "unmatched_cases",
];
pub const COMPARISON_COLUMNS: &[&str] = &["model_a", "model_b", "auc_a", "auc_b", "delta", "p_value", "method"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub complete: bool,
    pub failed_stage: Option<String>,
    pub failure: Option<String>,
    pub master_seed: u64,
    pub stage_seeds: BTreeMap<String, u64>,
    pub input_digests: BTreeMap<String, String>,
    /// SHA-256 of every file written next to the manifest.
    pub outputs: BTreeMap<String, String>,
}

impl AuditReport {
    /// Writes every table as CSV, the whole report as `report.json`, and a
    /// `MANIFEST.json` with seeds and digests. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut table = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
            let p = dir.join(name);
            f(&p)?;
            written.push(p);
            Ok(())
        };
        table("characteristics.csv", &|p| {
            write_csv(p, &self.characteristics, CHARACTERISTIC_COLUMNS)
        })?;
        table("pca.csv", &|p| write_csv(p, &self.pca, PCA_COLUMNS))?;
        table("screen_binary.csv", &|p| {
            write_csv(p, &self.screen_binary, SCREEN_COLUMNS)
        })?;
        table("screen_continuous.csv", &|p| {
            write_csv(p, &self.screen_continuous, REGRESSION_COLUMNS)
        })?;
        table("associations.csv", &|p| {
            write_csv(p, &self.associations, ASSOCIATION_COLUMNS)
        })?;
        table("balance.csv", &|p| write_csv(p, &self.balance, ASSOCIATION_COLUMNS))?;
        table("ladder.csv", &|p| write_csv(p, &self.ladder, PERFORMANCE_COLUMNS))?;
        table("predictors.csv", &|p| {
            write_csv(p, &self.predictors, PERFORMANCE_COLUMNS)
        })?;
        table("comparisons.csv", &|p| {
            write_csv(p, &self.comparisons, COMPARISON_COLUMNS)
        })?;
        table("report.json", &|p| {
            let text = serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))?;
            std::fs::write(p, text).map_err(|e| Error::io(p, e))
        })?;

        let mut outputs = BTreeMap::new();
        for p in &written {
            let name = p.file_name().expect("file name").to_string_lossy().into_owned();
            outputs.insert(name, sha256_file(p)?);
        }
        let m = &self.metadata;
        let manifest = Manifest {
            complete: m.complete,
            failed_stage: m.failed_stage.clone(),
            failure: m.failure.clone(),
            master_seed: m.master_seed,
            stage_seeds: m.stage_seeds.clone(),
            input_digests: m.input_digests.clone(),
            outputs,
        };
        let p = dir.join("MANIFEST.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(written)
    }
}
