//! von Mises-Fisher mixture model: the visual-concept dictionary.

mod density;
mod dictionary;
mod fit;

pub use density::{log_normalizer, vmf_log_density, KAPPA_CEILING};
pub use dictionary::{read_dictionary, write_dictionary, VcDictionary};
pub use fit::{
    assign_hard, estimate_kappa, fit_vmfm, fit_vmfm_from, fit_vmfm_traced, FitConfig, FitOutcome,
    MixtureParams, KAPPA_MIN,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} vectors to fit {needed} components, got {got}")]
    TooFewVectors { needed: usize, got: usize },
    #[error("vector {index} is not unit norm (norm {norm})")]
    NonUnitInput { index: usize, norm: f64 },
    #[error("vectors have dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("concentration {0} outside (0, {KAPPA_CEILING}]")]
    KappaOutOfRange(f64),
    #[error("non-finite log-likelihood at EM iteration {iteration}")]
    NonFiniteLogLikelihood { iteration: usize },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid dictionary: {0}")]
    InvalidDictionary(String),
}
