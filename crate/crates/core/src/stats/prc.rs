use serde::{Deserialize, Serialize};

use super::roc::{validate, TieGroups};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrcPoint {
    pub recall: f64,
    pub precision: f64,
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrcAnalysis {
    /// Average precision: step-wise area under the precision-recall curve.
    pub auprc: f64,
    pub curve: Vec<PrcPoint>,
    pub n_cases: usize,
    pub n_controls: usize,
}

/// Precision-recall analysis. Tied scores form one step; the curve's
/// recall-zero anchor takes the precision of the top-scored group.
pub fn prc_auc(scores: &[f64], labels: &[bool]) -> Result<PrcAnalysis> {
    let (n1, n0) = validate(scores, labels)?;
    let g = TieGroups::new(scores, labels);
    let mut curve = Vec::with_capacity(g.scores.len() + 1);
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut auprc = 0.0;
    let mut prev_recall = 0.0;
    for k in (0..g.scores.len()).rev() {
        tp += g.cases[k] as u64;
        fp += g.controls[k] as u64;
        let recall = tp as f64 / n1 as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        if curve.is_empty() {
            curve.push(PrcPoint {
                recall: 0.0,
                precision,
                threshold: f64::INFINITY,
            });
        }
        auprc += (recall - prev_recall) * precision;
        prev_recall = recall;
        curve.push(PrcPoint {
            recall,
            precision,
            threshold: g.scores[k],
        });
    }
    Ok(PrcAnalysis {
        auprc,
        curve,
        n_cases: n1,
        n_controls: n0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation_is_one() {
        let r = prc_auc(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(r.auprc, 1.0);
        assert_eq!(r.curve[0].recall, 0.0);
        assert_eq!(r.curve[0].precision, 1.0);
    }

    #[test]
    fn hand_worked_ranking() {
        // descending: + - + -  -> AP = 0.5*1 + 0.5*(2/3)
        let r = prc_auc(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert!((r.auprc - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(r.curve.last().unwrap().recall, 1.0);
    }

    #[test]
    fn all_ties_equal_prevalence() {
        let r = prc_auc(&[0.5; 4], &[true, false, false, false]).unwrap();
        assert_eq!(r.auprc, 0.25);
    }
}
