//! Synthetic datasets with a known confounding structure.
//!
//! Covariate effects on the outcome, covariate leakage into feature space and
//! direct outcome signal can each be dialed independently, which gives every
//! end-to-end check a ground truth.

mod generate;
mod oracle;
mod spec;

pub use generate::{generate, GroundTruth};
pub use oracle::{oracle_bayes_auc, oracle_bayes_auc_with, OracleTarget, ORACLE_DRAWS};
pub use spec::{ConfoundSpec, CovariateSpec};
