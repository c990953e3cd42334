use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::generate::{add_leak, draw_value, effect_term, leak_offsets, solve_intercept};
use super::spec::ConfoundSpec;
use crate::dataset::Kind;
use crate::error::{Error, Result};
use crate::models::logistic::sigmoid;
use crate::seed;
use crate::stats::auc;

pub const ORACLE_DRAWS: usize = 1_000_000;
const CHUNK: usize = 10_000;
const MAX_CONFIGS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleTarget {
    /// Features against the outcome over the whole population.
    Full,
    /// Within a stratum of fixed covariates (perfect matching).
    Matched,
}

/// Bayes-optimal AUC of predicting the outcome from features.
///
/// `Matched` holds every covariate fixed, leaving only the direct signal:
/// `Φ(direct_signal / √2)`. `Full` estimates by Monte Carlo the AUC of the
/// exact posterior `P(y | features)`, which mixes the direct-signal Gaussian
/// with the leaked covariates' Gaussians. Leaked covariates must be binary or
/// categorical.
pub fn oracle_bayes_auc(spec: &ConfoundSpec, which: OracleTarget) -> Result<f64> {
    oracle_bayes_auc_with(spec, which, ORACLE_DRAWS)
}

pub fn oracle_bayes_auc_with(spec: &ConfoundSpec, which: OracleTarget, draws: usize) -> Result<f64> {
    spec.validate()?;
    match which {
        OracleTarget::Matched => {
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            Ok(normal.cdf(spec.direct_signal / 2f64.sqrt()))
        }
        OracleTarget::Full => full_oracle(spec, draws),
    }
}

struct Draw {
    eta: f64,
    config: usize,
    outcome_u: f64,
    noise: Vec<f64>,
}

fn full_oracle(spec: &ConfoundSpec, draws: usize) -> Result<f64> {
    if draws < 2 {
        return Err(Error::InvalidArgument("oracle needs at least two draws".into()));
    }
    let leaked: Vec<usize> = (0..spec.covariates.len())
        .filter(|&j| spec.covariates[j].leak > 0.0)
        .collect();
    if let Some(&j) = leaked.iter().find(|&&j| spec.covariates[j].kind == Kind::Continuous) {
        return Err(Error::InvalidArgument(format!(
            "oracle supports discrete leaked covariates only; `{}` is continuous",
            spec.covariates[j].name
        )));
    }
    let radix: Vec<usize> = leaked
        .iter()
        .map(|&j| match spec.covariates[j].kind {
            Kind::Binary => 2,
            _ => spec.covariates[j].levels.len(),
        })
        .collect();
    let n_configs: usize = radix.iter().product();
    if n_configs > MAX_CONFIGS {
        return Err(Error::InvalidArgument(format!(
            "{n_configs} leaked configurations exceed {MAX_CONFIGS}"
        )));
    }
    let k = spec.direction_count();
    let offsets = leak_offsets(spec);
    // Mean feature coordinates (noise-sd units) of every configuration.
    let config_means: Vec<Vec<f64>> = (0..n_configs)
        .map(|mut code| {
            let mut m = vec![0.0; k];
            for (pos, &j) in leaked.iter().enumerate() {
                let value = (code % radix[pos]) as f64;
                code /= radix[pos];
                add_leak(&spec.covariates[j], value, offsets[j], &mut m);
            }
            m
        })
        .collect();

    let base = seed::derive(spec.seed, "oracle");
    let chunks = draws.div_ceil(CHUNK);
    let samples: Vec<Draw> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = seed::stream(base, c as u64);
            let len = CHUNK.min(draws - c * CHUNK);
            (0..len)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let mut eta = spec.patient_sd * z;
                    let mut config = 0;
                    let mut stride = 1;
                    let mut pos = 0;
                    for (j, cov) in spec.covariates.iter().enumerate() {
                        let v = draw_value(cov, &mut rng);
                        eta += effect_term(cov, v);
                        if pos < leaked.len() && leaked[pos] == j {
                            config += v as usize * stride;
                            stride *= radix[pos];
                            pos += 1;
                        }
                    }
                    let outcome_u = rng.random();
                    let noise = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                    Draw {
                        eta,
                        config,
                        outcome_u,
                        noise,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let eta: Vec<f64> = samples.iter().map(|d| d.eta).collect();
    let intercept = solve_intercept(&eta, spec.prevalence)?;
    // Joint weights P(config, y), Rao-Blackwellized over the outcome draw.
    let mut joint = vec![[0.0f64; 2]; n_configs];
    for d in &samples {
        let p = sigmoid(intercept + d.eta);
        joint[d.config][1] += p;
        joint[d.config][0] += 1.0 - p;
    }
    let log_joint: Vec<[f64; 2]> = joint.iter().map(|w| [w[0].ln(), w[1].ln()]).collect();

    let signal = spec.direct_signal;
    let (scores, labels): (Vec<f64>, Vec<bool>) = samples
        .par_iter()
        .map(|d| {
            let y = d.outcome_u < sigmoid(intercept + d.eta);
            let mut t = config_means[d.config].clone();
            if y {
                t[0] += signal;
            }
            for (ti, e) in t.iter_mut().zip(&d.noise) {
                *ti += e;
            }
            // log Σ_c P(c, y) · N(t | μ(c, y)), dropping shared constants.
            let mut terms = [Vec::with_capacity(n_configs), Vec::with_capacity(n_configs)];
            for (c, mean) in config_means.iter().enumerate() {
                let rest: f64 = (1..k).map(|i| (t[i] - mean[i]).powi(2)).sum();
                for (class, terms) in terms.iter_mut().enumerate() {
                    let mu0 = if class == 1 { signal } else { 0.0 };
                    terms.push(log_joint[c][class] - 0.5 * ((t[0] - mu0).powi(2) + rest));
                }
            }
            (log_sum_exp(&terms[1]) - log_sum_exp(&terms[0]), y)
        })
        .unzip();
    auc(&scores, &labels)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
