//! Few-shot classifiers over VC-Encodings.

mod kernel;
mod likelihood;
pub mod smoothing;

pub use kernel::{classify_nn, dilate, similarity, NeighborhoodSpec};
pub use likelihood::{
    classify_lh, contributions, fit_likelihood, log_likelihood, write_contributions_csv,
    Contribution, LikelihoodModel, DEFAULT_EPSILON, DEFAULT_SIGMA,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("encoding shape {got:?} does not match {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("encoding has no set bits")]
    EmptyEncoding,
    #[error("support set is empty")]
    EmptySupport,
    #[error("neighborhood radius {radius} exceeds the lattice limit {limit}")]
    RadiusTooLarge { radius: usize, limit: usize },
    #[error("theta map has {got} entries, expected {expected}")]
    ThetaLength { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
