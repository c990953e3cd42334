//! Confounder auditing for classifiers trained on observational data.

pub mod audit;
pub mod dataset;
pub mod error;
pub mod features;
pub mod matching;
pub mod models;
pub mod seed;
pub mod serde_float;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
