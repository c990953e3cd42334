use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score at which this point is reached (`score >= threshold` is positive).
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocAnalysis {
    pub auc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub curve: Vec<CurvePoint>,
    pub n_cases: usize,
    pub n_controls: usize,
}

/// Checks that scores and labels align, scores are finite and both classes
/// are present. Returns `(n_cases, n_controls)`.
pub(crate) fn validate(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("score at index {i} is not finite")));
    }
    let cases = labels.iter().filter(|&&l| l).count();
    let controls = labels.len() - cases;
    if cases == 0 || controls == 0 {
        return Err(Error::SingleClass);
    }
    Ok((cases, controls))
}

/// Groups of tied scores in ascending score order, with per-group class counts.
#[derive(Debug, Clone)]
pub(crate) struct TieGroups {
    pub scores: Vec<f64>,
    pub cases: Vec<u32>,
    pub controls: Vec<u32>,
    /// Group index of every input element, in input order.
    pub group_of: Vec<u32>,
}

impl TieGroups {
    pub fn new(scores: &[f64], labels: &[bool]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
        let mut groups = TieGroups {
            scores: Vec::new(),
            cases: Vec::new(),
            controls: Vec::new(),
            group_of: vec![0; scores.len()],
        };
        for &i in &order {
            if groups.scores.last() != Some(&scores[i]) {
                groups.scores.push(scores[i]);
                groups.cases.push(0);
                groups.controls.push(0);
            }
            let g = groups.scores.len() - 1;
            groups.group_of[i] = g as u32;
            if labels[i] {
                groups.cases[g] += 1;
            } else {
                groups.controls[g] += 1;
            }
        }
        groups
    }

    /// Mann–Whitney AUC from per-group case and control weights.
    pub fn weighted_auc(case_w: &[u32], control_w: &[u32]) -> f64 {
        let mut below = 0.0;
        let mut acc = 0.0;
        let mut total_cases = 0.0;
        for (&w1, &w0) in case_w.iter().zip(control_w) {
            let (w1, w0) = (w1 as f64, w0 as f64);
            acc += w1 * (below + 0.5 * w0);
            below += w0;
            total_cases += w1;
        }
        acc / (total_cases * below)
    }
}

/// Mann–Whitney AUC with ties counted one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    validate(scores, labels)?;
    let g = TieGroups::new(scores, labels);
    Ok(TieGroups::weighted_auc(&g.cases, &g.controls))
}

/// Empirical ROC curve from the strictest threshold down, starting at (0,0)
/// and ending at (1,1).
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<CurvePoint>> {
    let (n1, n0) = validate(scores, labels)?;
    let g = TieGroups::new(scores, labels);
    let mut curve = Vec::with_capacity(g.scores.len() + 1);
    curve.push(CurvePoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    });
    let (mut tp, mut fp) = (0u64, 0u64);
    for k in (0..g.scores.len()).rev() {
        tp += g.cases[k] as u64;
        fp += g.controls[k] as u64;
        curve.push(CurvePoint {
            fpr: fp as f64 / n0 as f64,
            tpr: tp as f64 / n1 as f64,
            threshold: g.scores[k],
        });
    }
    Ok(curve)
}

/// Point-estimate ROC analysis; the interval collapses to the estimate.
/// Use [`roc_analysis`] for bootstrap bounds.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocAnalysis> {
    let (n_cases, n_controls) = validate(scores, labels)?;
    let auc = auc(scores, labels)?;
    Ok(RocAnalysis {
        auc,
        ci_low: auc,
        ci_high: auc,
        curve: roc_curve(scores, labels)?,
        n_cases,
        n_controls,
    })
}

/// ROC analysis with a stratified percentile bootstrap interval.
pub fn roc_analysis(scores: &[f64], labels: &[bool], replicates: usize, seed: u64) -> Result<RocAnalysis> {
    let mut roc = roc_auc(scores, labels)?;
    let (lo, hi) = super::bootstrap::bootstrap_auc_ci(scores, labels, replicates, seed)?;
    // Percentile bounds can exclude the point estimate on very skewed
    // replicate distributions; widen so the interval always contains it.
    roc.ci_low = lo.min(roc.auc);
    roc.ci_high = hi.max(roc.auc);
    Ok(roc)
}

/// Trapezoidal area under a curve given as (x, y) points sorted by x.
#[cfg(test)]
fn trapezoid(curve: &[CurvePoint]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let scores = [0.8, 0.9, 0.1, 0.2];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_is_half() {
        let scores = [0.3; 6];
        let labels = [true, false, true, false, false, true];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass)));
    }

    #[test]
    fn curve_endpoints_and_trapezoid() {
        let scores = [0.1, 0.4, 0.35, 0.8, 0.4, 0.7];
        let labels = [false, false, true, true, true, false];
        let curve = roc_curve(&scores, &labels).unwrap();
        let first = curve.first().unwrap();
        let last = curve.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in curve.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
        let a = auc(&scores, &labels).unwrap();
        assert!((trapezoid(&curve) - a).abs() < 1e-12);
    }

    #[test]
    fn nan_scores_rejected() {
        assert!(auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }
}
