//! Numerical engine: k-means discretization, a dense symmetric eigensolver
//! and normalized spectral clustering of transition graphs.

mod eigen;
mod kmeans;
mod matrix;
mod spectral;

pub use eigen::{symmetric_eigen, SymmetricEigen, JACOBI_MAX_SWEEPS};
pub use kmeans::{kmeans_assign, kmeans_fit, kmeans_fit_weighted, ClusterModel, KMeansParams};
pub use matrix::Matrix;
pub use spectral::{
    eigengap_analysis, eigengap_suggest, normalized_affinity, spectral_cluster, spectral_decompose,
    symmetrize, symmetrize_dense, Affinity, EigengapAnalysis, SpectralDecomposition,
    SubgraphPartition,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusteringError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("dimension mismatch: expected {expected}, found {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}
