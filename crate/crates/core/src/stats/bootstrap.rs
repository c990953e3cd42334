use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::roc::{validate, TieGroups};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonMethod {
    DelongPaired,
    BootstrapUnpaired,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucComparison {
    pub auc_a: f64,
    pub auc_b: f64,
    pub delta: f64,
    pub p_value: f64,
    pub method: ComparisonMethod,
}

/// Precomputed state for stratified resampling of one scored sample.
struct Resampler {
    groups: TieGroups,
    case_groups: Vec<u32>,
    control_groups: Vec<u32>,
}

impl Resampler {
    fn new(scores: &[f64], labels: &[bool]) -> Result<Self> {
        let (n1, n0) = validate(scores, labels)?;
        if n1 < 2 || n0 < 2 {
            return Err(Error::InvalidArgument(
                "bootstrap needs at least two cases and two controls".into(),
            ));
        }
        let groups = TieGroups::new(scores, labels);
        let mut case_groups = Vec::with_capacity(n1);
        let mut control_groups = Vec::with_capacity(n0);
        for (i, &l) in labels.iter().enumerate() {
            if l {
                case_groups.push(groups.group_of[i]);
            } else {
                control_groups.push(groups.group_of[i]);
            }
        }
        Ok(Self {
            groups,
            case_groups,
            control_groups,
        })
    }

    fn point(&self) -> f64 {
        TieGroups::weighted_auc(&self.groups.cases, &self.groups.controls)
    }

    /// AUC of one stratified resample: cases and controls are drawn with
    /// replacement separately, preserving both class sizes.
    fn replicate<R: Rng>(&self, rng: &mut R) -> f64 {
        let k = self.groups.scores.len();
        let mut w1 = vec![0u32; k];
        let mut w0 = vec![0u32; k];
        let n1 = self.case_groups.len();
        for _ in 0..n1 {
            w1[self.case_groups[rng.random_range(0..n1)] as usize] += 1;
        }
        let n0 = self.control_groups.len();
        for _ in 0..n0 {
            w0[self.control_groups[rng.random_range(0..n0)] as usize] += 1;
        }
        TieGroups::weighted_auc(&w1, &w0)
    }
}

/// Linear-interpolation quantile of sorted data (R's default type 7).
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn replicate_aucs(sampler: &Resampler, replicates: usize, seed: u64) -> Vec<f64> {
    (0..replicates)
        .into_par_iter()
        .map(|i| sampler.replicate(&mut seed::stream(seed, i as u64)))
        .collect()
}

/// Stratified percentile bootstrap 95% interval for the AUC.
///
/// Replicate `i` draws from its own stream of `seed`, so the result does not
/// depend on thread count or execution order.
pub fn bootstrap_auc_ci(scores: &[f64], labels: &[bool], replicates: usize, seed: u64) -> Result<(f64, f64)> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least two replicates".into()));
    }
    let sampler = Resampler::new(scores, labels)?;
    let mut aucs = replicate_aucs(&sampler, replicates, seed);
    aucs.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&aucs, 0.025), quantile_sorted(&aucs, 0.975)))
}

/// Two-sided bootstrap test for the difference of two AUCs measured on
/// independent samples.
///
/// `p = 2·Φ(−|Δ| / SE)`, with SE the standard deviation of the replicate
/// differences. With a zero SE and a nonzero difference the p-value is 0,
/// meaning below `1/replicates`.
pub fn auc_test_unpaired(
    a: (&[f64], &[bool]),
    b: (&[f64], &[bool]),
    replicates: usize,
    seed: u64,
) -> Result<AucComparison> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least two replicates".into()));
    }
    let sa = Resampler::new(a.0, a.1)?;
    let sb = Resampler::new(b.0, b.1)?;
    let (auc_a, auc_b) = (sa.point(), sb.point());
    let delta = auc_a - auc_b;

    let seed_a = crate::seed::derive(seed, "unpaired-a");
    let seed_b = crate::seed::derive(seed, "unpaired-b");
    let ra = replicate_aucs(&sa, replicates, seed_a);
    let rb = replicate_aucs(&sb, replicates, seed_b);
    let diffs: Vec<f64> = ra.iter().zip(&rb).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    let se = var.sqrt();

    let p_value = if se > 0.0 {
        two_sided_normal_p(delta / se)
    } else if delta == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(AucComparison {
        auc_a,
        auc_b,
        delta,
        p_value,
        method: ComparisonMethod::BootstrapUnpaired,
    })
}

pub(crate) fn two_sided_normal_p(z: f64) -> f64 {
    let normal = Normal::standard();
    (2.0 * normal.cdf(-z.abs())).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_data_gives_degenerate_interval() {
        let scores: Vec<f64> = (0..400)
            .map(|i| if i < 200 { 1.0 + i as f64 } else { -(i as f64) })
            .collect();
        let labels: Vec<bool> = (0..400).map(|i| i < 200).collect();
        let (lo, hi) = bootstrap_auc_ci(&scores, &labels, 500, 1).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
    }

    #[test]
    fn quantile_type7() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.025) - 1.075).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_seed() {
        let scores: Vec<f64> = (0..60).map(|i| ((i * 37) % 17) as f64).collect();
        let labels: Vec<bool> = (0..60).map(|i| i % 3 == 0).collect();
        let a = bootstrap_auc_ci(&scores, &labels, 300, 9).unwrap();
        let b = bootstrap_auc_ci(&scores, &labels, 300, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn needs_two_per_class() {
        assert!(bootstrap_auc_ci(&[0.1, 0.2, 0.3], &[true, false, false], 100, 0).is_err());
    }

    #[test]
    fn identical_samples_are_not_different() {
        let scores: Vec<f64> = (0..100).map(|i| ((i * 13) % 29) as f64).collect();
        let labels: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let r = auc_test_unpaired((&scores, &labels), (&scores, &labels), 500, 3).unwrap();
        assert_eq!(r.delta, 0.0);
        assert!(r.p_value > 0.9);
    }
}
