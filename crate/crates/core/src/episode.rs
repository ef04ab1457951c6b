//! N-way K-shot episode sampling and accuracy reporting.
//!
//! Each trial draws from its own ChaCha stream (`seed`, stream = trial
//! index), so trials can run in any order or in parallel and still produce
//! the same report.

use std::io::Write;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{dilate, fit_likelihood, ClassifyError, NeighborhoodSpec};
use crate::encoding::{compute_distances, encode, search_threshold, EncodingError, VcEncoding};
use crate::store::{collect_vectors_at, FeatureStore, StoreError};
use crate::vmf::{fit_vmfm, FitConfig, FitError, VcDictionary};

/// z-value of the two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Nn,
    Likelihood,
}

/// Which images the VC dictionary is learned from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictionaryScope {
    /// Support images of the current trial only.
    PerTrial,
    /// Every image in the store, learned once for all trials.
    WholeStore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub ways: usize,
    pub shots: usize,
    pub queries: usize,
    pub trials: usize,
    pub seed: u64,
    pub num_vcs: usize,
    pub coverage_target: f64,
    pub threshold_step: f64,
    pub sigma: f64,
    pub radius: usize,
    pub classifier: ClassifierKind,
    pub dictionary_scope: DictionaryScope,
    /// Permute support labels before fitting (chance-level control).
    pub shuffle_support_labels: bool,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        let fit = FitConfig::default();
        Self {
            ways: 5,
            shots: 1,
            queries: 15,
            trials: 600,
            seed: 0,
            num_vcs: 200,
            coverage_target: crate::encoding::DEFAULT_COVERAGE_TARGET,
            threshold_step: crate::encoding::DEFAULT_THRESHOLD_STEP,
            sigma: crate::classify::DEFAULT_SIGMA,
            radius: 1,
            classifier: ClassifierKind::Likelihood,
            dictionary_scope: DictionaryScope::PerTrial,
            shuffle_support_labels: false,
            max_iters: fit.max_iters,
            rel_tol: fit.rel_tol,
        }
    }
}

impl EpisodeSpec {
    pub fn validate(&self) -> Result<(), EpisodeError> {
        let bad = |m: &str| Err(EpisodeError::InvalidSpec(m.to_string()));
        if self.ways == 0 || self.shots == 0 || self.queries == 0 || self.trials == 0 {
            return bad("ways, shots, queries and trials must be positive");
        }
        if self.num_vcs == 0 {
            return bad("num_vcs must be positive");
        }
        if !(self.coverage_target > 0.0 && self.coverage_target <= 1.0) {
            return bad("coverage_target must lie in (0, 1]");
        }
        if !(self.threshold_step > 0.0 && self.threshold_step.is_finite()) {
            return bad("threshold_step must be positive");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be finite and non-negative");
        }
        if self.max_iters == 0 || !(self.rel_tol > 0.0) {
            return bad("max_iters and rel_tol must be positive");
        }
        Ok(())
    }

    fn fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            num_vcs: self.num_vcs,
            seed,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            ..FitConfig::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("invalid episode spec: {0}")]
    InvalidSpec(String),
    #[error("need {needed} categories with at least {per_category} images each, found {eligible}")]
    InsufficientImages {
        needed: usize,
        per_category: usize,
        eligible: usize,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

impl EpisodeError {
    /// True for failures of the numerical pipeline rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            EpisodeError::Fit(FitError::NonFiniteLogLikelihood { .. })
                | EpisodeError::Encoding(EncodingError::NoThresholdSatisfies { .. })
        )
    }
}

/// Grid indices (into the store) and labels of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSample {
    pub categories: Vec<u32>,
    pub support: Vec<(usize, u32)>,
    pub query: Vec<(usize, u32)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub accuracy: f64,
    pub threshold: f64,
    pub correct: usize,
    pub total: usize,
    pub sample: EpisodeSample,
}

/// The RNG stream of one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws `ways` categories without replacement among those holding at least
/// `shots + queries` images, then disjoint support and query images for each.
pub fn sample_episode<R: Rng + ?Sized>(
    store: &FeatureStore,
    spec: &EpisodeSpec,
    rng: &mut R,
) -> Result<EpisodeSample, EpisodeError> {
    let per_category = spec.shots + spec.queries;
    let eligible: Vec<(u32, Vec<usize>)> = store
        .indices_by_category()
        .into_iter()
        .filter(|(_, v)| v.len() >= per_category)
        .collect();
    if eligible.len() < spec.ways {
        return Err(EpisodeError::InsufficientImages {
            needed: spec.ways,
            per_category,
            eligible: eligible.len(),
        });
    }
    let mut sample = EpisodeSample {
        categories: Vec::with_capacity(spec.ways),
        support: Vec::with_capacity(spec.ways * spec.shots),
        query: Vec::with_capacity(spec.ways * spec.queries),
    };
    for ci in index::sample(rng, eligible.len(), spec.ways) {
        let (cat, images) = &eligible[ci];
        sample.categories.push(*cat);
        let picks = index::sample(rng, images.len(), per_category).into_vec();
        for (j, &pick) in picks.iter().enumerate() {
            let entry = (images[pick], *cat);
            if j < spec.shots {
                sample.support.push(entry);
            } else {
                sample.query.push(entry);
            }
        }
    }
    Ok(sample)
}

/// Fits the trial dictionary from the pooled support vectors only.
pub fn learn_dictionary(
    store: &FeatureStore,
    support: &[usize],
    spec: &EpisodeSpec,
    seed: u64,
) -> Result<VcDictionary, EpisodeError> {
    let pooled = collect_vectors_at(store, support)?;
    Ok(fit_vmfm(&pooled.vectors, &spec.fit_config(seed))?)
}

/// Runs one trial: sample, learn VCs from the support set, pick the encoding
/// threshold on the support set, classify every query.
pub fn run_episode(
    store: &FeatureStore,
    spec: &EpisodeSpec,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome, EpisodeError> {
    run_episode_with(store, spec, rng, None)
}

fn run_episode_with(
    store: &FeatureStore,
    spec: &EpisodeSpec,
    rng: &mut ChaCha8Rng,
    shared: Option<&VcDictionary>,
) -> Result<TrialOutcome, EpisodeError> {
    spec.validate()?;
    let sample = sample_episode(store, spec, rng)?;
    let fit_seed: u64 = rng.gen();
    let mut support_labels: Vec<u32> = sample.support.iter().map(|s| s.1).collect();
    if spec.shuffle_support_labels {
        support_labels.shuffle(rng);
    }

    let support_idx: Vec<usize> = sample.support.iter().map(|s| s.0).collect();
    let owned;
    let dict = match shared {
        Some(d) => d,
        None => {
            owned = learn_dictionary(store, &support_idx, spec, fit_seed)?;
            &owned
        }
    };

    let grids = store.grids();
    let support_dist = support_idx
        .iter()
        .map(|&i| compute_distances(&grids[i], dict))
        .collect::<Result<Vec<_>, _>>()?;
    let threshold = search_threshold(&support_dist, spec.coverage_target, spec.threshold_step)?;
    let support_enc = support_dist
        .iter()
        .map(|d| encode(d, threshold))
        .collect::<Result<Vec<_>, _>>()?;
    let query_enc = sample
        .query
        .iter()
        .map(|&(i, _)| compute_distances(&grids[i], dict).and_then(|d| encode(&d, threshold)))
        .collect::<Result<Vec<_>, _>>()?;

    let labelled: Vec<(VcEncoding, u32)> = support_enc.into_iter().zip(support_labels).collect();
    let predictions: Vec<u32> = match spec.classifier {
        ClassifierKind::Nn => {
            let nbhd = NeighborhoodSpec::new(spec.radius);
            let support_dilated: Vec<Vec<bool>> = labelled.iter().map(|(e, _)| dilate(e, nbhd.radius)).collect();
            query_enc
                .iter()
                .map(|q| predict_nn(q, &labelled, &support_dilated, nbhd))
                .collect::<Result<_, _>>()?
        }
        ClassifierKind::Likelihood => {
            let model = fit_likelihood(&labelled, spec.sigma, crate::classify::DEFAULT_EPSILON)?;
            query_enc
                .iter()
                .map(|q| crate::classify::classify_lh(q, &model))
                .collect::<Result<_, _>>()?
        }
    };
    let correct = predictions
        .iter()
        .zip(&sample.query)
        .filter(|(p, (_, truth))| *p == truth)
        .count();
    let total = sample.query.len();
    Ok(TrialOutcome {
        accuracy: correct as f64 / total as f64,
        threshold,
        correct,
        total,
        sample,
    })
}

/// Nearest-neighbor prediction where an encoding without set bits scores
/// zero similarity against everything instead of failing the trial.
fn predict_nn(
    query: &VcEncoding,
    support: &[(VcEncoding, u32)],
    support_dilated: &[Vec<bool>],
    nbhd: NeighborhoodSpec,
) -> Result<u32, ClassifyError> {
    let (h, w, _) = query.shape();
    if nbhd.radius > h.min(w) {
        return Err(ClassifyError::RadiusTooLarge {
            radius: nbhd.radius,
            limit: h.min(w),
        });
    }
    let query_dilated = dilate(query, nbhd.radius);
    let overlap = |a: &VcEncoding, b: &[bool]| -> f64 {
        let total = a.count_ones();
        if total == 0 {
            return 0.0;
        }
        let hits = a.bits().iter().zip(b).filter(|(&x, &y)| x && y).count();
        hits as f64 / total as f64
    };
    let mut best = (f64::NEG_INFINITY, support[0].1);
    for ((s, label), s_dilated) in support.iter().zip(support_dilated) {
        if s.shape() != query.shape() {
            return Err(ClassifyError::ShapeMismatch {
                expected: query.shape(),
                got: s.shape(),
            });
        }
        let k = 0.5 * (overlap(query, s_dilated) + overlap(s, &query_dilated));
        if k > best.0 {
            best = (k, *label);
        }
    }
    Ok(best.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub accuracy: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub spec: EpisodeSpec,
    pub per_trial: Vec<TrialRecord>,
    pub mean_accuracy: f64,
    pub ci95_halfwidth: f64,
}

impl EpisodeReport {
    pub fn from_trials(spec: EpisodeSpec, per_trial: Vec<TrialRecord>) -> Self {
        let accs: Vec<f64> = per_trial.iter().map(|t| t.accuracy).collect();
        let (mean_accuracy, ci95_halfwidth) = summarize(&accs);
        Self {
            spec,
            per_trial,
            mean_accuracy,
            ci95_halfwidth,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv<W: Write>(&self, dest: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(dest);
        wtr.write_record(["trial", "accuracy", "threshold"])?;
        for (i, t) in self.per_trial.iter().enumerate() {
            wtr.write_record([i.to_string(), t.accuracy.to_string(), t.threshold.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Mean and 95% half-width `1.96 · s / √n` (sample std `s`, zero for n = 1).
pub fn summarize(accuracies: &[f64]) -> (f64, f64) {
    let n = accuracies.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = accuracies.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Z_95 * var.sqrt() / (n as f64).sqrt())
}

/// Runs `spec.trials` independent trials and aggregates them.
pub fn run_benchmark(store: &FeatureStore, spec: &EpisodeSpec) -> Result<EpisodeReport, EpisodeError> {
    spec.validate()?;
    let shared = match spec.dictionary_scope {
        DictionaryScope::PerTrial => None,
        DictionaryScope::WholeStore => {
            let all: Vec<usize> = (0..store.grids().len()).collect();
            // stream u64::MAX is never used by a trial
            let seed = trial_rng(spec.seed, u64::MAX).gen();
            Some(learn_dictionary(store, &all, spec, seed)?)
        }
    };
    let outcomes: Vec<Result<TrialRecord, EpisodeError>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(spec.seed, t as u64);
            run_episode_with(store, spec, &mut rng, shared.as_ref()).map(|o| TrialRecord {
                accuracy: o.accuracy,
                threshold: o.threshold,
            })
        })
        .collect();
    let per_trial = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(EpisodeReport::from_trials(spec.clone(), per_trial))
}
