use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{ConfoundSpec, CovariateSpec};
use crate::dataset::{ColumnData, Dataset, Group, Kind, Schema, VariableSpec};
use crate::error::{Error, Result};
use crate::models::logistic::sigmoid;
use crate::seed;

const INTERCEPT_BOUND: f64 = 50.0;

/// The realized generative quantities behind a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub intercept: f64,
    /// `P(outcome = 1)` of every row.
    pub row_probabilities: Vec<f64>,
    /// Noise-free feature vector of every row (n × D).
    pub feature_means: DMatrix<f64>,
    /// Planted orthonormal directions, one per row (k × D).
    pub directions: DMatrix<f64>,
    /// What each direction encodes: `outcome`, `name` or `name=level`.
    pub direction_labels: Vec<String>,
}

pub(crate) fn draw_value(c: &CovariateSpec, rng: &mut ChaCha8Rng) -> f64 {
    match c.kind {
        Kind::Binary => f64::from(u8::from(rng.random::<f64>() < c.frequency.unwrap_or(0.5))),
        Kind::Continuous => {
            let z: f64 = StandardNormal.sample(rng);
            c.mean.unwrap_or(0.0) + c.sd.unwrap_or(1.0) * z
        }
        Kind::Categorical => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let weights = c.level_weights();
            for (k, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    return k as f64;
                }
            }
            (weights.len() - 1) as f64
        }
    }
}

/// Signed magnitude a value carries (standardized for continuous, level
/// index over `L − 1` for categorical).
pub(crate) fn effect_term(c: &CovariateSpec, value: f64) -> f64 {
    match c.kind {
        Kind::Binary => c.effect * value,
        Kind::Continuous => c.effect * (value - c.mean.unwrap_or(0.0)) / c.sd.unwrap_or(1.0),
        Kind::Categorical => c.effect * value / (c.levels.len() - 1) as f64,
    }
}

/// Adds the covariate's leak, in noise-sd units, to `coords` (coordinates
/// along the planted directions). `offset` is its first direction.
pub(crate) fn add_leak(c: &CovariateSpec, value: f64, offset: usize, coords: &mut [f64]) {
    if c.leak == 0.0 {
        return;
    }
    match c.kind {
        Kind::Binary => coords[offset] += c.leak * value,
        Kind::Continuous => coords[offset] += c.leak * (value - c.mean.unwrap_or(0.0)) / c.sd.unwrap_or(1.0),
        Kind::Categorical => {
            let level = value as usize;
            if level > 0 {
                coords[offset + level - 1] += c.leak;
            }
        }
    }
}

/// First direction index of each covariate's leak block.
pub(crate) fn leak_offsets(spec: &ConfoundSpec) -> Vec<usize> {
    let mut next = 1;
    spec.covariates
        .iter()
        .map(|c| {
            let at = next;
            next += c.leak_width();
            at
        })
        .collect()
}

fn direction_labels(spec: &ConfoundSpec) -> Vec<String> {
    let mut labels = vec![spec.outcome.clone()];
    for c in &spec.covariates {
        match (c.leak_width(), c.kind) {
            (0, _) => {}
            (_, Kind::Categorical) => labels.extend(c.levels[1..].iter().map(|l| format!("{}={l}", c.name))),
            _ => labels.push(c.name.clone()),
        }
    }
    labels
}

/// Seeded Gram-Schmidt orthonormal directions (k × D).
pub(crate) fn planted_directions(k: usize, dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seed::rng(seed);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        for b in &basis {
            let proj = v.dot(b);
            v.axpy(-proj, b, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    DMatrix::from_fn(k, dim, |i, j| basis[i][j])
}

/// Intercept making the mean row probability equal `prevalence`.
pub(crate) fn solve_intercept(eta: &[f64], prevalence: f64) -> Result<f64> {
    let mean_p = |b: f64| eta.iter().map(|e| sigmoid(b + e)).sum::<f64>() / eta.len() as f64;
    let (low, high) = (mean_p(-INTERCEPT_BOUND), mean_p(INTERCEPT_BOUND));
    if prevalence <= low || prevalence >= high {
        return Err(Error::InfeasiblePrevalence {
            target: prevalence,
            low,
            high,
        });
    }
    let (mut a, mut b) = (-INTERCEPT_BOUND, INTERCEPT_BOUND);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mean_p(mid) < prevalence {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

struct Patient {
    rows: usize,
    values: Vec<f64>,
    random_intercept: f64,
}

struct Row {
    patient: usize,
    values: Vec<f64>,
    eta: f64,
    outcome_u: f64,
    noise: Vec<f64>,
    missing_u: Vec<f64>,
}

/// Draws a dataset from the generative model.
///
/// PT covariates are constant within a patient; HP and META covariates vary
/// by row. Each patient and each row draws from its own random stream, so
/// output is identical for any thread count.
pub fn generate(spec: &ConfoundSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let covs = &spec.covariates;
    let per_patient = |c: &CovariateSpec| c.group == Group::Pt;

    let patient_seed = seed::derive(spec.seed, "patients");
    let patients: Vec<Patient> = (0..spec.n_patients)
        .into_par_iter()
        .map(|p| {
            let mut rng = seed::stream(patient_seed, p as u64);
            let rows = rng.random_range(spec.rows_per_patient.0..=spec.rows_per_patient.1);
            let values = covs
                .iter()
                .map(|c| {
                    if per_patient(c) {
                        draw_value(c, &mut rng)
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            let z: f64 = StandardNormal.sample(&mut rng);
            Patient {
                rows,
                values,
                random_intercept: spec.patient_sd * z,
            }
        })
        .collect();

    let owner: Vec<usize> = patients
        .iter()
        .enumerate()
        .flat_map(|(p, pt)| std::iter::repeat_n(p, pt.rows))
        .collect();
    let n = owner.len();
    let row_seed = seed::derive(spec.seed, "rows");
    let rows: Vec<Row> = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::stream(row_seed, r as u64);
            let pt = &patients[owner[r]];
            let values: Vec<f64> = covs
                .iter()
                .zip(&pt.values)
                .map(|(c, &v)| if per_patient(c) { v } else { draw_value(c, &mut rng) })
                .collect();
            let eta = pt.random_intercept + covs.iter().zip(&values).map(|(c, &v)| effect_term(c, v)).sum::<f64>();
            let outcome_u = rng.random();
            let noise = (0..spec.feature_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let missing_u = covs.iter().map(|_| rng.random()).collect();
            Row {
                patient: owner[r],
                values,
                eta,
                outcome_u,
                noise,
                missing_u,
            }
        })
        .collect();

    let eta: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    let intercept = solve_intercept(&eta, spec.prevalence)?;
    let row_probabilities: Vec<f64> = eta.iter().map(|e| sigmoid(intercept + e)).collect();
    let outcome: Vec<bool> = rows
        .iter()
        .zip(&row_probabilities)
        .map(|(r, &p)| r.outcome_u < p)
        .collect();

    let k = spec.direction_count();
    let directions = planted_directions(k, spec.feature_dim, seed::derive(spec.seed, "directions"));
    let offsets = leak_offsets(spec);
    let mut coords = DMatrix::zeros(n, k);
    for (i, row) in rows.iter().enumerate() {
        let mut c = vec![0.0; k];
        c[0] = spec.direct_signal * f64::from(u8::from(outcome[i]));
        for (j, cov) in covs.iter().enumerate() {
            add_leak(cov, row.values[j], offsets[j], &mut c);
        }
        coords.set_row(i, &nalgebra::RowDVector::from_vec(c));
    }
    let feature_means = (coords * &directions) * spec.noise_sd;
    let noise = DMatrix::from_fn(n, spec.feature_dim, |i, j| rows[i].noise[j]);
    let features = &feature_means + noise * spec.noise_sd;

    let mut variables = vec![VariableSpec::new(spec.outcome.clone(), Kind::Binary, Group::Outcome)];
    let mut columns = vec![ColumnData::Numeric(
        outcome.iter().map(|&y| Some(f64::from(u8::from(y)))).collect(),
    )];
    for (j, c) in covs.iter().enumerate() {
        variables.push(VariableSpec::new(c.name.clone(), c.kind, c.group));
        let observed = |r: &Row| r.missing_u[j] >= c.missing_rate;
        columns.push(match c.kind {
            Kind::Categorical => ColumnData::Levels(
                rows.iter()
                    .map(|r| observed(r).then(|| c.levels[r.values[j] as usize].clone()))
                    .collect(),
            ),
            _ => ColumnData::Numeric(rows.iter().map(|r| observed(r).then_some(r.values[j])).collect()),
        });
    }
    let schema = Schema::new(variables)?;
    let ds = Dataset::new(
        &schema,
        columns,
        (0..n).map(|i| format!("r{i}")).collect(),
        rows.iter().map(|r| format!("p{}", r.patient)).collect(),
        Some(features),
    )?;
    Ok((
        ds,
        GroundTruth {
            intercept,
            row_probabilities,
            feature_means,
            directions,
            direction_labels: direction_labels(spec),
        },
    ))
}
