use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pca::fit_pca;
use crate::error::{Error, Result};
use crate::seed;

const MAX_POINTS: usize = 5000;
const ENTROPY_TOL: f64 = 1e-5;
const SEARCH_STEPS: usize = 200;
const MIN_GAIN: f64 = 0.01;
const P_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    /// Inputs wider than this are first reduced by PCA.
    pub pca_dims: usize,
    /// Accepted for compatibility; gradients are always exact.
    pub theta: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            pca_dims: 50,
            theta: 0.5,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            learning_rate: 200.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneResult {
    /// n × 2.
    pub embedding: DMatrix<f64>,
    pub initial_kl: f64,
    pub final_kl: f64,
}

impl TsneConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if n > MAX_POINTS {
            return Err(Error::InvalidArgument(format!(
                "exact t-SNE supports at most {MAX_POINTS} points, got {n}"
            )));
        }
        if !(self.perplexity > 0.0) || self.perplexity >= (n as f64 - 1.0) / 3.0 {
            return Err(Error::InvalidArgument(format!(
                "perplexity {} must be in (0, (n-1)/3) for n = {n}",
                self.perplexity
            )));
        }
        for m in [self.initial_momentum, self.final_momentum] {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::InvalidArgument(format!("momentum {m} not in [0, 1)")));
            }
        }
        if !(self.learning_rate > 0.0) || self.pca_dims == 0 {
            return Err(Error::InvalidArgument(
                "learning rate and pca_dims must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn squared_distances(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = x.nrows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut s = 0.0;
                    for k in 0..x.ncols() {
                        let d = x[(i, k)] - x[(j, k)];
                        s += d * d;
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// Conditional distribution `P(j | i)` whose perplexity matches the target,
/// found by bisection on the Gaussian precision.
fn conditional_row(dist: &[f64], i: usize, perplexity: f64) -> Option<Vec<f64>> {
    let target = perplexity.ln();
    let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
    let mut row = vec![0.0; dist.len()];
    // Shifting by the nearest distance keeps exp() away from underflow.
    let d_min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    for _ in 0..SEARCH_STEPS {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for (j, &d) in dist.iter().enumerate() {
            row[j] = if j == i { 0.0 } else { (-(d - d_min) * beta).exp() };
            sum += row[j];
            weighted += (d - d_min) * row[j];
        }
        let entropy = sum.ln() + beta * weighted / sum;
        if (entropy - target).abs() < ENTROPY_TOL {
            row.iter_mut().for_each(|p| *p /= sum);
            return Some(row);
        }
        if entropy > target {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    None
}

/// Symmetric joint probabilities `(P + Pᵀ) / 2n`, floored at 1e-12.
pub fn joint_probabilities(x: &DMatrix<f64>, perplexity: f64) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let dist = squared_distances(x);
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| conditional_row(&dist[i], i, perplexity).ok_or(Error::PerplexitySearch { index: i }))
        .collect();
    let mut cond = DMatrix::zeros(n, n);
    for (i, r) in rows.into_iter().enumerate() {
        for (j, v) in r?.into_iter().enumerate() {
            cond[(i, j)] = v;
        }
    }
    let mut p = (&cond + cond.transpose()) / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[(i, j)] = p[(i, j)].max(P_FLOOR);
            }
        }
    }
    let total = p.sum();
    Ok(p / total)
}

/// Student-t affinities `1 / (1 + |yᵢ − yⱼ|²)` and their off-diagonal sum.
fn affinities(y: &[[f64; 2]]) -> (Vec<Vec<f64>>, f64) {
    let num: Vec<Vec<f64>> = y
        .par_iter()
        .enumerate()
        .map(|(i, yi)| {
            y.iter()
                .enumerate()
                .map(|(j, yj)| {
                    if i == j {
                        0.0
                    } else {
                        let (a, b) = (yi[0] - yj[0], yi[1] - yj[1]);
                        1.0 / (1.0 + a * a + b * b)
                    }
                })
                .collect()
        })
        .collect();
    let z = num.iter().map(|r| r.iter().sum::<f64>()).sum();
    (num, z)
}

fn kl_divergence(p: &DMatrix<f64>, y: &[[f64; 2]]) -> f64 {
    let (num, z) = affinities(y);
    let n = y.len();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[(i, j)];
                let qij = (num[i][j] / z).max(f64::MIN_POSITIVE);
                kl += pij * (pij / qij).ln();
            }
        }
    }
    kl
}

/// Exact t-SNE embedding into two dimensions.
///
/// Early exaggeration lasts for the first 10% of iterations; momentum
/// switches from initial to final after the first quarter.
pub fn tsne(x: &DMatrix<f64>, cfg: &TsneConfig) -> Result<TsneResult> {
    let n = x.nrows();
    cfg.validate(n)?;
    let reduced;
    let input = if x.ncols() > cfg.pca_dims {
        let model = fit_pca(x, cfg.pca_dims.min(n - 1))?;
        reduced = model.project(x)?;
        &reduced
    } else {
        x
    };
    let p = joint_probabilities(input, cfg.perplexity)?;

    let mut rng = seed::rng(cfg.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid sd");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let initial_kl = kl_divergence(&p, &y);

    let stop_exaggeration = cfg.iterations / 10;
    let momentum_switch = cfg.iterations / 4;
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];

    for iter in 0..cfg.iterations {
        let exaggeration = if iter < stop_exaggeration {
            cfg.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < momentum_switch {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };
        let (num, z) = affinities(&y);
        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let w = (exaggeration * p[(i, j)] - num[i][j] / z) * num[i][j];
                    g[0] += w * (y[i][0] - y[j][0]);
                    g[1] += w * (y[i][1] - y[j][1]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        for i in 0..n {
            for d in 0..2 {
                let same_sign = (grad[i][d] > 0.0) == (update[i][d] > 0.0);
                gains[i][d] = if same_sign {
                    gains[i][d] * 0.8
                } else {
                    gains[i][d] + 0.2
                };
                gains[i][d] = gains[i][d].max(MIN_GAIN);
                update[i][d] = momentum * update[i][d] - cfg.learning_rate * gains[i][d] * grad[i][d];
                y[i][d] += update[i][d];
            }
        }
        for d in 0..2 {
            let mean = y.iter().map(|v| v[d]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|v| v[d] -= mean);
        }
    }

    let final_kl = kl_divergence(&p, &y);
    Ok(TsneResult {
        embedding: DMatrix::from_fn(n, 2, |i, d| y[i][d]),
        initial_kl,
        final_kl,
    })
}
