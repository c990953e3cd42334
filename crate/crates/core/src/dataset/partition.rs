use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Train/test split with every patient's rows on one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub ratio: f64,
}

/// Randomly assigns `round(ratio · patients)` patients to train, the rest to
/// test. Indices on each side are ascending.
pub fn partition_by_patient(ds: &Dataset, ratio: f64, seed: u64) -> Result<Partition> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("ratio {ratio} not in (0, 1)")));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut rows_of: HashMap<&str, Vec<usize>> = HashMap::new();
    for (r, p) in ds.patient_ids().iter().enumerate() {
        rows_of
            .entry(p.as_str())
            .or_insert_with(|| {
                order.push(p.as_str());
                Vec::new()
            })
            .push(r);
    }
    if order.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 patients to partition, found {}",
            order.len()
        )));
    }
    order.shuffle(&mut seed::rng(seed));
    let n_train = ((ratio * order.len() as f64).round() as usize).clamp(1, order.len() - 1);

    let mut train_indices: Vec<usize> = order[..n_train]
        .iter()
        .flat_map(|p| rows_of[p].iter().copied())
        .collect();
    let mut test_indices: Vec<usize> = order[n_train..]
        .iter()
        .flat_map(|p| rows_of[p].iter().copied())
        .collect();
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(Partition {
        train_indices,
        test_indices,
        seed,
        ratio,
    })
}
