use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::report::{write_csv, AuditReport, CurveSet, ASSOCIATION_COLUMNS, PERFORMANCE_COLUMNS, REGRESSION_COLUMNS};
use crate::error::{Error, Result};
use crate::stats::{CurvePoint, PrcPoint};

/// Figure panels for which plot data can be emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    /// Image-model AUC per binary screen target.
    Fig2a,
    /// R² per continuous screen target.
    Fig2b,
    /// ROC and PRC curves of the six predictor sets.
    Fig2c,
    /// Matching ladder: balance counts, curves and AUC summary per cohort.
    Fig3,
    /// Covariate-only, NB ensemble and direct multimodal classifiers.
    Fig4,
    /// Covariate-outcome associations, overall and per device.
    FigS5,
}

impl FigureId {
    pub const ALL: [FigureId; 6] = [
        FigureId::Fig2a,
        FigureId::Fig2b,
        FigureId::Fig2c,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::FigS5,
    ];
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FigureId::Fig2a => "fig2a",
            FigureId::Fig2b => "fig2b",
            FigureId::Fig2c => "fig2c",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::FigS5 => "figs5",
        })
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase();
        FigureId::ALL
            .into_iter()
            .find(|f| f.to_string() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown figure id `{s}`")))
    }
}

const SUMMARY_COLUMNS: &[&str] = &["target", "auc", "ci_low", "ci_high", "n_train", "n_test"];
const ROC_COLUMNS: &[&str] = &["fpr", "tpr", "threshold"];
const PRC_COLUMNS: &[&str] = &["recall", "precision", "threshold"];
const BALANCE_COLUMNS: &[&str] = &["cohort", "significant_covariates", "n_cases", "n_controls"];

/// Classifiers shown in the ensemble comparison.
pub const FIG4_MODELS: [&str; 6] = ["pt", "ptHp", "imgPt", "imgPtHp", "nb_imgPt", "nb_imgPtHp"];

#[derive(Serialize)]
struct ScreenSummary<'a> {
    target: &'a str,
    auc: f64,
    ci_low: f64,
    ci_high: f64,
    n_train: usize,
    n_test: usize,
}

#[derive(Serialize)]
struct BalanceCount<'a> {
    cohort: &'a str,
    significant_covariates: Option<usize>,
    n_cases: usize,
    n_controls: usize,
}

#[derive(Serialize)]
struct RocRow {
    fpr: f64,
    tpr: f64,
    #[serde(with = "crate::serde_float")]
    threshold: f64,
}

#[derive(Serialize)]
struct PrcRow {
    recall: f64,
    precision: f64,
    #[serde(with = "crate::serde_float")]
    threshold: f64,
}

fn roc_rows(c: &[CurvePoint]) -> Vec<RocRow> {
    c.iter()
        .map(|p| RocRow {
            fpr: p.fpr,
            tpr: p.tpr,
            threshold: p.threshold,
        })
        .collect()
}

fn prc_rows(c: &[PrcPoint]) -> Vec<PrcRow> {
    c.iter()
        .map(|p| PrcRow {
            recall: p.recall,
            precision: p.precision,
            threshold: p.threshold,
        })
        .collect()
}

struct Emitter {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Emitter {
    fn table<T: Serialize>(&mut self, name: &str, rows: &[T], header: &[&str]) -> Result<()> {
        let p = self.dir.join(name);
        write_csv(&p, rows, header)?;
        self.written.push(p);
        Ok(())
    }

    fn curves(&mut self, set: &CurveSet, prc: bool) -> Result<()> {
        self.table(&format!("roc_{}.csv", set.label), &roc_rows(&set.roc), ROC_COLUMNS)?;
        if prc {
            self.table(&format!("prc_{}.csv", set.label), &prc_rows(&set.prc), PRC_COLUMNS)?;
        }
        Ok(())
    }
}

fn require(ok: bool, figure: FigureId, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("report has no {what} for {figure}")))
    }
}

/// Writes the data behind one figure into `dir/{figure}/`, one file per
/// panel or curve. Returns the written paths.
pub fn emit_plot_data(report: &AuditReport, figure: FigureId, dir: &Path) -> Result<Vec<PathBuf>> {
    let out = dir.join(figure.to_string());
    let curves = |panel: &str| -> Vec<&CurveSet> { report.curves.iter().filter(|c| c.panel == panel).collect() };
    match figure {
        FigureId::Fig2a => require(!report.screen_binary.is_empty(), figure, "predictability screen")?,
        FigureId::Fig2b => require(!report.screen_continuous.is_empty(), figure, "regression screen")?,
        FigureId::Fig2c | FigureId::Fig4 => require(!report.predictors.is_empty(), figure, "predictor sets")?,
        FigureId::Fig3 => require(!report.ladder.is_empty(), figure, "matching ladder")?,
        FigureId::FigS5 => require(!report.associations.is_empty(), figure, "association tests")?,
    }
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut em = Emitter {
        dir: out,
        written: Vec::new(),
    };
    match figure {
        FigureId::Fig2a => {
            let rows: Vec<ScreenSummary> = report
                .screen_binary
                .iter()
                .map(|r| ScreenSummary {
                    target: &r.target,
                    auc: r.auc,
                    ci_low: r.ci_low,
                    ci_high: r.ci_high,
                    n_train: r.n_train,
                    n_test: r.n_test,
                })
                .collect();
            em.table("summary.csv", &rows, SUMMARY_COLUMNS)?;
        }
        FigureId::Fig2b => em.table("summary.csv", &report.screen_continuous, REGRESSION_COLUMNS)?,
        FigureId::Fig2c => {
            let sets = curves("predictors");
            for c in sets.iter().filter(|c| !c.label.starts_with("nb_")) {
                em.curves(c, true)?;
            }
            let rows: Vec<_> = report
                .predictors
                .iter()
                .filter(|r| !r.label.starts_with("nb_"))
                .collect();
            em.table("summary.csv", &rows, PERFORMANCE_COLUMNS)?;
        }
        FigureId::Fig3 => {
            let counts: Vec<BalanceCount> = report
                .ladder
                .iter()
                .map(|r| BalanceCount {
                    cohort: &r.label,
                    significant_covariates: r.significant_covariates,
                    n_cases: r.n_cases,
                    n_controls: r.n_controls,
                })
                .collect();
            em.table("balance_counts.csv", &counts, BALANCE_COLUMNS)?;
            for c in curves("ladder") {
                em.curves(c, true)?;
            }
            em.table("summary.csv", &report.ladder, PERFORMANCE_COLUMNS)?;
        }
        FigureId::Fig4 => {
            let rows: Vec<_> = FIG4_MODELS
                .iter()
                .filter_map(|m| report.predictors.iter().find(|r| r.label == *m))
                .collect();
            for c in curves("predictors")
                .into_iter()
                .filter(|c| FIG4_MODELS.contains(&c.label.as_str()))
            {
                em.curves(c, false)?;
            }
            em.table("summary.csv", &rows, PERFORMANCE_COLUMNS)?;
        }
        FigureId::FigS5 => em.table("associations.csv", &report.associations, ASSOCIATION_COLUMNS)?,
    }
    Ok(em.written)
}
