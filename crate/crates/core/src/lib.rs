//! Few-shot image classification with visual concepts.
//!
//! The pipeline runs over CNN feature grids stored in a VCFS container:
//!
//! 1. [`store`] reads/writes feature grids and pools unit feature vectors.
//! 2. [`vmf`] fits a von Mises-Fisher mixture whose mean directions are the
//!    visual concepts (VCs).
//! 3. [`encoding`] turns a grid into VC distances and a thresholded binary
//!    VC-Encoding, with a coverage-driven threshold search.
//! 4. [`classify`] holds the two few-shot classifiers: a spatially tolerant
//!    nearest-neighbor matcher and a factorizable Bernoulli likelihood model.
//! 5. [`episode`] samples N-way K-shot trials and reports accuracy with a
//!    95% confidence interval.

pub mod bessel;
pub mod classify;
pub mod encoding;
pub mod episode;
pub mod format;
pub mod store;
pub mod synthetic;
pub mod vectors;
pub mod vmf;

pub use classify::{
    classify_lh, classify_nn, fit_likelihood, log_likelihood, similarity, ClassifyError,
    LikelihoodModel, NeighborhoodSpec,
};
pub use encoding::{
    compute_distances, encode, search_threshold, DistanceTensor, EncodingError, VcEncoding,
};
pub use episode::{
    run_benchmark, run_episode, ClassifierKind, DictionaryScope, EpisodeError, EpisodeReport,
    EpisodeSpec,
};
pub use store::{
    collect_vectors, read_store, write_store, FeatureGrid, FeatureStore, PooledVectors,
    StoreError,
};
pub use vectors::VectorSet;
pub use vmf::{assign_hard, fit_vmfm, vmf_log_density, FitConfig, FitError, VcDictionary};
