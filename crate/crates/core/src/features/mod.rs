//! Dimensionality reduction of feature embeddings.

mod pca;
mod tsne;

pub use pca::{explained_fraction, fit_pca, PcaModel};
pub use tsne::{joint_probabilities, tsne, TsneConfig, TsneResult};

/// Component count used for modeling.
pub const DEFAULT_COMPONENTS: usize = 10;
