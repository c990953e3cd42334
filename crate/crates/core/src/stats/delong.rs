//! DeLong comparison of two correlated AUCs measured on the same rows.
//!
//! Placement values are computed from midranks (Sun & Xu), which is
//! O(n log n) per score vector instead of the O(n·m) pairwise kernel.

use super::bootstrap::{two_sided_normal_p, AucComparison, ComparisonMethod};
use super::roc::validate;
use crate::error::{Error, Result};

/// Structural components of a paired DeLong analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct DelongComponents {
    pub auc: [f64; 2],
    /// Per-case placement values, one pair per case.
    pub case_placements: Vec<[f64; 2]>,
    /// Per-control placement values, one pair per control.
    pub control_placements: Vec<[f64; 2]>,
    /// Covariance matrix of (AUC_a, AUC_b).
    pub covariance: [[f64; 2]; 2],
}

impl DelongComponents {
    pub fn variance_of_difference(&self) -> f64 {
        let s = &self.covariance;
        s[0][0] + s[1][1] - 2.0 * s[0][1]
    }
}

/// 1-based midranks: tied values share the mean of the ranks they occupy.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    ranks
}

fn covariance(rows: &[[f64; 2]]) -> [[f64; 2]; 2] {
    let n = rows.len() as f64;
    let mean = [
        rows.iter().map(|r| r[0]).sum::<f64>() / n,
        rows.iter().map(|r| r[1]).sum::<f64>() / n,
    ];
    let mut out = [[0.0; 2]; 2];
    for r in rows {
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    for row in &mut out {
        for v in row.iter_mut() {
            *v /= n - 1.0;
        }
    }
    out
}

pub fn delong_components(scores_a: &[f64], scores_b: &[f64], labels: &[bool]) -> Result<DelongComponents> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::DimensionMismatch {
            expected: scores_a.len(),
            found: scores_b.len(),
        });
    }
    let (m, n) = validate(scores_a, labels)?;
    validate(scores_b, labels)?;
    if m < 2 || n < 2 {
        return Err(Error::InvalidArgument(
            "DeLong test needs at least two cases and two controls".into(),
        ));
    }

    let mut case_placements = vec![[0.0; 2]; m];
    let mut control_placements = vec![[0.0; 2]; n];
    let mut auc = [0.0; 2];
    for (k, scores) in [scores_a, scores_b].into_iter().enumerate() {
        let cases: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
        let controls: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| !l)
            .map(|(&s, _)| s)
            .collect();
        let combined: Vec<f64> = cases.iter().chain(&controls).copied().collect();
        let tx = midranks(&cases);
        let ty = midranks(&controls);
        let tz = midranks(&combined);
        for i in 0..m {
            case_placements[i][k] = (tz[i] - tx[i]) / n as f64;
        }
        for j in 0..n {
            control_placements[j][k] = 1.0 - (tz[m + j] - ty[j]) / m as f64;
        }
        auc[k] = case_placements.iter().map(|p| p[k]).sum::<f64>() / m as f64;
    }

    let s10 = covariance(&case_placements);
    let s01 = covariance(&control_placements);
    let mut cov = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            cov[a][b] = s10[a][b] / m as f64 + s01[a][b] / n as f64;
        }
    }
    Ok(DelongComponents {
        auc,
        case_placements,
        control_placements,
        covariance: cov,
    })
}

/// Two-sided paired DeLong test of `AUC(scores_a) − AUC(scores_b)`.
pub fn delong_test(scores_a: &[f64], scores_b: &[f64], labels: &[bool]) -> Result<AucComparison> {
    let comp = delong_components(scores_a, scores_b, labels)?;
    let delta = comp.auc[0] - comp.auc[1];
    let var = comp.variance_of_difference();
    // Cancellation can leave a tiny positive variance for identical inputs.
    let scale = comp.covariance[0][0].abs().max(comp.covariance[1][1].abs());
    let p_value = if var <= 1e-14 * scale || var <= 0.0 {
        if delta.abs() < 1e-15 {
            1.0
        } else {
            0.0
        }
    } else {
        two_sided_normal_p(delta / var.sqrt())
    };
    Ok(AucComparison {
        auc_a: comp.auc[0],
        auc_b: comp.auc[1],
        delta,
        p_value,
        method: ComparisonMethod::DelongPaired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn identical_scores_give_p_one() {
        let s = [0.9, 0.3, 0.6, 0.2, 0.8, 0.1, 0.75, 0.4];
        let l = [true, false, true, false, true, false, false, true];
        let r = delong_test(&s, &s, &l).unwrap();
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn monotone_transform_has_zero_delta() {
        let s = [0.9, 0.3, 0.6, 0.2, 0.8, 0.1, 0.75, 0.4, 0.55, 0.05];
        let l = [true, false, true, false, true, false, false, true, true, false];
        let cubed: Vec<f64> = s.iter().map(|v| v * v * v).collect();
        let r = delong_test(&s, &cubed, &l).unwrap();
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.p_value, 1.0);
    }
}
