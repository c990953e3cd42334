use serde::{Deserialize, Serialize};

use super::roc::{validate, TieGroups};
use crate::error::Result;

/// Confusion statistics at one threshold. A score at or above `threshold` is
/// predicted positive.
///
/// Ratios with an empty denominator (e.g. `ppv` when nothing is predicted
/// positive) are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    #[serde(with = "crate::serde_float")]
    pub npv: f64,
    #[serde(with = "crate::serde_float")]
    pub ppv: f64,
    pub tn: u64,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    /// True when no threshold achieves a positive Youden index.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

impl OperatingPoint {
    pub fn from_counts(threshold: f64, tn: u64, tp: u64, fn_: u64, fp: u64) -> Self {
        let n = tn + tp + fn_ + fp;
        let sensitivity = ratio(tp, tp + fn_);
        let specificity = ratio(tn, tn + fp);
        OperatingPoint {
            threshold,
            sensitivity,
            specificity,
            accuracy: ratio(tp + tn, n),
            npv: ratio(tn, tn + fn_),
            ppv: ratio(tp, tp + fp),
            tn,
            tp,
            fn_,
            fp,
            degenerate: !(sensitivity + specificity - 1.0 > 0.0),
        }
    }

    pub fn youden(&self) -> f64 {
        self.sensitivity + self.specificity - 1.0
    }

    pub fn total(&self) -> u64 {
        self.tn + self.tp + self.fn_ + self.fp
    }
}

/// Best operating point by Youden's J.
///
/// Candidates are ±∞ and the midpoints between adjacent distinct scores.
/// Ties in J go to the candidate with the higher specificity.
pub fn youden_point(scores: &[f64], labels: &[bool]) -> Result<OperatingPoint> {
    let (n1, n0) = validate(scores, labels)?;
    let g = TieGroups::new(scores, labels);
    let k = g.scores.len();

    // Walk thresholds from +inf downward; candidate `t` sits just below group
    // `t` (ascending order), so groups t..k are predicted positive.
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut best = OperatingPoint::from_counts(f64::INFINITY, n0 as u64, 0, n1 as u64, 0);
    let mut best_j = best.youden();
    for t in (0..k).rev() {
        tp += g.cases[t] as u64;
        fp += g.controls[t] as u64;
        let threshold = if t == 0 {
            f64::NEG_INFINITY
        } else {
            (g.scores[t - 1] + g.scores[t]) / 2.0
        };
        let tn = n0 as u64 - fp;
        let fn_ = n1 as u64 - tp;
        let j = tp as f64 / n1 as f64 + tn as f64 / n0 as f64 - 1.0;
        // Moving down only lowers specificity, so ties keep the earlier point.
        if j > best_j + 1e-12 {
            best_j = j;
            best = OperatingPoint::from_counts(threshold, tn, tp, fn_, fp);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_scores_use_midpoint() {
        let p = youden_point(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap();
        assert_eq!(p.threshold, 0.5);
        assert_eq!(p.youden(), 1.0);
        assert_eq!((p.tp, p.tn, p.fp, p.fn_), (2, 2, 0, 0));
        assert!(!p.degenerate);
    }

    #[test]
    fn table_s6_counts() {
        let p = OperatingPoint::from_counts(0.033, 4283, 153, 54, 1480);
        assert!((p.sensitivity - 0.739).abs() < 1e-3);
        assert!((p.specificity - 0.743).abs() < 1e-3);
        assert!((p.ppv - 0.094).abs() < 1e-3);
        assert!((p.npv - 0.987).abs() < 1e-3);
        assert_eq!(p.total(), 5970);
    }

    #[test]
    fn all_ties_are_degenerate() {
        let p = youden_point(&[0.4; 5], &[true, false, true, false, false]).unwrap();
        assert_eq!(p.youden(), 0.0);
        assert!(p.degenerate);
        assert_eq!(p.specificity, 1.0);
    }

    #[test]
    fn counts_sum_to_n() {
        let scores = [0.3, 0.1, 0.7, 0.7, 0.5, 0.2, 0.9, 0.4];
        let labels = [true, false, true, false, true, false, true, false];
        let p = youden_point(&scores, &labels).unwrap();
        assert_eq!(p.total(), 8);
        // positives are exactly the scores at or above the threshold
        let predicted = scores.iter().filter(|&&s| s >= p.threshold).count() as u64;
        assert_eq!(predicted, p.tp + p.fp);
    }
}
