//! Error types shared across the crate.

use thiserror::Error;

use crate::mle::FitResult;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A failure-probability map or its derivative evaluated to NaN or
    /// infinity, which signals an invalid parameter value for the model.
    #[error("model '{model}' evaluated to a non-finite value at x={x}, theta={theta}")]
    ModelEvaluation { model: String, x: f64, theta: f64 },

    /// The likelihood maximizer ran out of iterations. Carries the best
    /// point seen so far.
    #[error("likelihood maximization exceeded {max_iter} iterations (best theta so far: {})", best.theta_hat)]
    Estimation { max_iter: usize, best: FitResult },

    /// The per-subgroup information matrix has an eigenvalue at or below
    /// the floor, so the rotation is undefined for this subgroup.
    #[error("singular information matrix (min eigenvalue {min_eigenvalue:.3e})")]
    SingularInformation { min_eigenvalue: f64 },

    /// More constraints than dimensions: K+1 > 2^m means not all K
    /// parameters can be identified from subgroups of size m.
    #[error("cannot rotate subgroups of size {group_size} with {params} parameters: {} constraints exceed dimension {}", params + 1, 1usize << group_size)]
    Identifiability { params: usize, group_size: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// More than 1% of the replications in an experiment cell failed even
    /// after resampling.
    #[error("{failures} of {replications} replications failed in cell '{cell}' (limit is 1%)")]
    TooManyFailures {
        cell: String,
        failures: usize,
        replications: usize,
    },
}
