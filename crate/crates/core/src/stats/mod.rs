//! Evaluation statistics: exact association tests, ROC and precision-recall
//! analysis, bootstrap intervals, AUC comparisons and operating points.

mod bootstrap;
mod delong;
mod fisher;
mod operating;
mod prc;
mod roc;

pub use bootstrap::{auc_test_unpaired, bootstrap_auc_ci, AucComparison, ComparisonMethod};
pub use delong::{delong_components, delong_test, DelongComponents};
pub use fisher::{fisher_exact, AssociationResult, Table2x2};
pub use operating::{youden_point, OperatingPoint};
pub use prc::{prc_auc, PrcAnalysis, PrcPoint};
pub use roc::{auc, roc_analysis, roc_auc, roc_curve, CurvePoint, RocAnalysis};

pub(crate) use bootstrap::quantile_sorted;

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}
