//! EM for a mixture of von Mises-Fisher distributions.
//!
//! The E-step is data-parallel over fixed-size chunks of vectors; chunk
//! statistics are always combined in chunk order, so the result does not
//! depend on the number of worker threads. Input vectors are put into a
//! canonical (lexicographic) order first, which also makes the fit
//! independent of the order the caller supplied them in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::density::{log_normalizer, KAPPA_CEILING};
use super::dictionary::VcDictionary;
use super::FitError;
use crate::vectors::{dot, norm, VectorSet};

/// Smallest concentration an M-step will produce.
pub const KAPPA_MIN: f64 = 1e-6;

const MAX_MEAN_RESULTANT: f64 = 1.0 - 1e-9;
const STARVED_MASS: f64 = 1e-6;
const KMEANS_ITERS: usize = 10;
const CHUNK_ROWS: usize = 256;
const CHUNKS_PER_WAVE: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub num_vcs: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub kappa_max: f64,
}

impl FitConfig {
    pub fn new(num_vcs: usize) -> Self {
        Self {
            num_vcs,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), FitError> {
        if self.num_vcs == 0 {
            return Err(FitError::InvalidConfig("num_vcs must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(FitError::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(FitError::InvalidConfig("rel_tol must be positive".into()));
        }
        if !(self.kappa_max >= KAPPA_MIN && self.kappa_max <= KAPPA_CEILING) {
            return Err(FitError::InvalidConfig(format!(
                "kappa_max must lie in [{KAPPA_MIN}, {KAPPA_CEILING}]"
            )));
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            num_vcs: 200,
            seed: 0,
            max_iters: 200,
            rel_tol: 1e-6,
            kappa_max: 1e5,
        }
    }
}

/// Raw mixture parameters, used to start EM from a known point.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParams {
    pub means: VectorSet,
    pub concentrations: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MixtureParams {
    fn num_components(&self) -> usize {
        self.means.len()
    }

    fn log_priors(&self) -> Vec<f64> {
        let dim = self.means.dim();
        self.weights
            .iter()
            .zip(&self.concentrations)
            .map(|(&w, &k)| w.ln() + log_normalizer(dim, k))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub dictionary: VcDictionary,
    /// Data log-likelihood of the initial parameters, then after every
    /// EM iteration.
    pub log_likelihood_trace: Vec<f64>,
}

/// The mean-resultant approximation `κ ≈ (r̄d − r̄³)/(1 − r̄²)`, clamped to
/// `[KAPPA_MIN, kappa_max]`.
pub fn estimate_kappa(mean_resultant: f64, dim: usize, kappa_max: f64) -> f64 {
    let r = mean_resultant.clamp(0.0, MAX_MEAN_RESULTANT);
    let d = dim as f64;
    let k = (r * d - r * r * r) / (1.0 - r * r);
    k.clamp(KAPPA_MIN, kappa_max)
}

pub fn fit_vmfm(vectors: &VectorSet, config: &FitConfig) -> Result<VcDictionary, FitError> {
    fit_vmfm_traced(vectors, config).map(|o| o.dictionary)
}

pub fn fit_vmfm_traced(vectors: &VectorSet, config: &FitConfig) -> Result<FitOutcome, FitError> {
    config.validate()?;
    check_inputs(vectors, config.num_vcs)?;
    let x = canonical_order(vectors);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = initialize(&x, config, &mut rng);
    run_em(&x, init, config)
}

/// Runs EM from explicit starting parameters.
pub fn fit_vmfm_from(
    vectors: &VectorSet,
    init: MixtureParams,
    config: &FitConfig,
) -> Result<FitOutcome, FitError> {
    config.validate()?;
    let v = init.num_components();
    if v != config.num_vcs || init.concentrations.len() != v || init.weights.len() != v {
        return Err(FitError::InvalidConfig(
            "initial parameters disagree with num_vcs".into(),
        ));
    }
    check_inputs(vectors, v)?;
    if init.means.dim() != vectors.dim() {
        return Err(FitError::DimensionMismatch {
            expected: vectors.dim(),
            got: init.means.dim(),
        });
    }
    let x = canonical_order(vectors);
    run_em(&x, init, config)
}

fn check_inputs(vectors: &VectorSet, num_vcs: usize) -> Result<(), FitError> {
    if vectors.len() < num_vcs {
        return Err(FitError::TooFewVectors {
            needed: num_vcs,
            got: vectors.len(),
        });
    }
    if vectors.dim() < 2 {
        return Err(FitError::DimensionTooSmall(vectors.dim()));
    }
    for (index, row) in vectors.rows().enumerate() {
        let n = norm(row);
        if !((n - 1.0).abs() < 1e-6) {
            return Err(FitError::NonUnitInput { index, norm: n });
        }
    }
    Ok(())
}

fn canonical_order(vectors: &VectorSet) -> VectorSet {
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_by(|&a, &b| {
        vectors
            .row(a)
            .iter()
            .zip(vectors.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    vectors.permuted(&order)
}

/// Index of the best-matching center; ties go to the smaller index.
fn nearest(row: &[f64], centers: &VectorSet) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (c, center) in centers.rows().enumerate() {
        let s = dot(row, center);
        if s > best.1 {
            best = (c, s);
        }
    }
    best
}

/// Row with the smallest best-similarity to `centers`; ties to the smaller row.
fn farthest(x: &VectorSet, centers: &VectorSet) -> usize {
    let mut worst = (0, f64::INFINITY);
    for (i, row) in x.rows().enumerate() {
        let s = nearest(row, centers).1;
        if s < worst.1 {
            worst = (i, s);
        }
    }
    worst.0
}

fn normalize_into(sum: &[f64], out: &mut [f64]) -> bool {
    let n = norm(sum);
    if n > 0.0 && n.is_finite() {
        for (o, s) in out.iter_mut().zip(sum) {
            *o = s / n;
        }
        true
    } else {
        false
    }
}

/// k-means++ seeding by cosine distance, then a few spherical k-means rounds.
fn initialize(x: &VectorSet, config: &FitConfig, rng: &mut ChaCha8Rng) -> MixtureParams {
    let m = x.len();
    let dim = x.dim();
    let k = config.num_vcs;

    let mut centers = Vec::with_capacity(k * dim);
    centers.extend_from_slice(x.row(rng.gen_range(0..m)));
    let cost = |r: &[f64], c: &[f64]| (1.0 - dot(r, c)).max(0.0).powi(2);
    let mut dist2: Vec<f64> = x.rows().map(|r| cost(r, &centers[..dim])).collect();
    // greedy k-means++: keep the best of several D² draws
    let candidates = 2 + (k as f64).ln().floor() as usize;
    for _ in 1..k {
        let total: f64 = dist2.iter().sum();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..candidates {
            let pick = if total > 0.0 {
                let target = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut chosen = m - 1;
                for (i, &d) in dist2.iter().enumerate() {
                    acc += d;
                    if acc > target && d > 0.0 {
                        chosen = i;
                        break;
                    }
                }
                chosen
            } else {
                rng.gen_range(0..m)
            };
            let cand = x.row(pick);
            let next: Vec<f64> = dist2.iter().zip(x.rows()).map(|(&d, r)| d.min(cost(r, cand))).collect();
            let potential: f64 = next.iter().sum();
            if best.as_ref().map_or(true, |b| potential < b.0) {
                best = Some((potential, pick, next));
            }
        }
        let (_, pick, next) = best.expect("at least two candidates");
        centers.extend_from_slice(x.row(pick));
        dist2 = next;
    }
    let mut centers = VectorSet::new(dim, centers);

    let mut labels = vec![0usize; m];
    for _ in 0..KMEANS_ITERS {
        for (label, row) in labels.iter_mut().zip(x.rows()) {
            *label = nearest(row, &centers).0;
        }
        let mut sums = vec![0.0; k * dim];
        for (&label, row) in labels.iter().zip(x.rows()) {
            for (s, v) in sums[label * dim..(label + 1) * dim].iter_mut().zip(row) {
                *s += v;
            }
        }
        let mut next = centers.as_slice().to_vec();
        let mut empty = Vec::new();
        for c in 0..k {
            if !normalize_into(&sums[c * dim..(c + 1) * dim], &mut next[c * dim..(c + 1) * dim]) {
                empty.push(c);
            }
        }
        centers = VectorSet::new(dim, next);
        for c in empty {
            let i = farthest(x, &centers);
            let mut data = centers.as_slice().to_vec();
            data[c * dim..(c + 1) * dim].copy_from_slice(x.row(i));
            centers = VectorSet::new(dim, data);
        }
    }
    for (label, row) in labels.iter_mut().zip(x.rows()) {
        *label = nearest(row, &centers).0;
    }

    let global_kappa = estimate_kappa(mean_resultant(x), dim, config.kappa_max);
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0; k * dim];
    for (&label, row) in labels.iter().zip(x.rows()) {
        counts[label] += 1;
        for (s, v) in sums[label * dim..(label + 1) * dim].iter_mut().zip(row) {
            *s += v;
        }
    }
    let concentrations = (0..k)
        .map(|c| {
            if counts[c] >= 2 {
                let r = norm(&sums[c * dim..(c + 1) * dim]) / counts[c] as f64;
                estimate_kappa(r, dim, config.kappa_max)
            } else {
                global_kappa
            }
        })
        .collect();
    // every component keeps positive mass so ln α stays finite
    let mass: Vec<f64> = counts.iter().map(|&n| n.max(1) as f64).collect();
    let total: f64 = mass.iter().sum();
    MixtureParams {
        means: centers,
        concentrations,
        weights: mass.iter().map(|w| w / total).collect(),
    }
}

fn mean_resultant(x: &VectorSet) -> f64 {
    let mut sum = vec![0.0; x.dim()];
    for row in x.rows() {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
    }
    norm(&sum) / x.len() as f64
}

/// Sufficient statistics of one E-step.
struct Sweep {
    log_likelihood: f64,
    /// Total responsibility per component.
    mass: Vec<f64>,
    /// Responsibility-weighted vector sums, row-major V × C.
    resultants: Vec<f64>,
    /// Row whose largest responsibility is smallest, with that value.
    worst_fit: (f64, usize),
}

impl Sweep {
    fn zeros(k: usize, dim: usize) -> Self {
        Self {
            log_likelihood: 0.0,
            mass: vec![0.0; k],
            resultants: vec![0.0; k * dim],
            worst_fit: (f64::INFINITY, usize::MAX),
        }
    }

    fn absorb(&mut self, other: Sweep) {
        self.log_likelihood += other.log_likelihood;
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        for (a, b) in self.resultants.iter_mut().zip(&other.resultants) {
            *a += b;
        }
        if other.worst_fit.0 < self.worst_fit.0 {
            self.worst_fit = other.worst_fit;
        }
    }
}

fn sweep_chunk(x: &VectorSet, params: &MixtureParams, log_priors: &[f64], start: usize, end: usize) -> Sweep {
    let k = params.num_components();
    let dim = x.dim();
    let mut out = Sweep::zeros(k, dim);
    let mut logp = vec![0.0; k];
    for i in start..end {
        let row = x.row(i);
        let mut max = f64::NEG_INFINITY;
        for v in 0..k {
            let lp = log_priors[v] + params.concentrations[v] * dot(params.means.row(v), row);
            logp[v] = lp;
            max = max.max(lp);
        }
        let mut total = 0.0;
        for lp in logp.iter_mut() {
            *lp = (*lp - max).exp();
            total += *lp;
        }
        out.log_likelihood += max + total.ln();
        let mut top = 0.0f64;
        for v in 0..k {
            let gamma = logp[v] / total;
            top = top.max(gamma);
            out.mass[v] += gamma;
            for (s, f) in out.resultants[v * dim..(v + 1) * dim].iter_mut().zip(row) {
                *s += gamma * f;
            }
        }
        if top < out.worst_fit.0 {
            out.worst_fit = (top, i);
        }
    }
    out
}

fn sweep(x: &VectorSet, params: &MixtureParams) -> Sweep {
    let log_priors = params.log_priors();
    let m = x.len();
    let n_chunks = m.div_ceil(CHUNK_ROWS);
    let mut acc = Sweep::zeros(params.num_components(), x.dim());
    let mut first = 0;
    while first < n_chunks {
        let last = (first + CHUNKS_PER_WAVE).min(n_chunks);
        let parts: Vec<Sweep> = (first..last)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK_ROWS;
                sweep_chunk(x, params, &log_priors, start, (start + CHUNK_ROWS).min(m))
            })
            .collect();
        for p in parts {
            acc.absorb(p);
        }
        first = last;
    }
    acc
}

/// Expected complete-data log-likelihood contribution of a component's
/// concentration, with the mean already at its optimum.
fn kappa_objective(dim: usize, mass: f64, resultant_norm: f64, kappa: f64) -> f64 {
    mass * log_normalizer(dim, kappa) + kappa * resultant_norm
}

fn m_step(stats: &Sweep, prev: &MixtureParams, m: usize, config: &FitConfig) -> MixtureParams {
    let k = prev.num_components();
    let dim = prev.means.dim();
    let mut means = prev.means.as_slice().to_vec();
    let mut concentrations = prev.concentrations.clone();
    let weights = stats.mass.iter().map(|&n| n / m as f64).collect();
    for v in 0..k {
        let mass = stats.mass[v];
        let s = &stats.resultants[v * dim..(v + 1) * dim];
        let s_norm = norm(s);
        if !(mass > 0.0) || !normalize_into(s, &mut means[v * dim..(v + 1) * dim]) {
            continue;
        }
        let proposal = estimate_kappa(s_norm / mass, dim, config.kappa_max);
        // generalized EM: keep the old κ unless the closed-form estimate
        // does at least as well on the expected log-likelihood
        let old = prev.concentrations[v].min(config.kappa_max);
        if kappa_objective(dim, mass, s_norm, proposal) >= kappa_objective(dim, mass, s_norm, old) {
            concentrations[v] = proposal;
        } else {
            concentrations[v] = old;
        }
    }
    MixtureParams {
        means: VectorSet::new(dim, means),
        concentrations,
        weights,
    }
}

/// Moves the first starved component onto the worst-explained vector.
fn repair_starved(
    x: &VectorSet,
    stats: &Sweep,
    params: &MixtureParams,
    global_kappa: f64,
) -> Option<MixtureParams> {
    let v = stats.mass.iter().position(|&n| n < STARVED_MASS)?;
    let (_, row) = stats.worst_fit;
    if row == usize::MAX {
        return None;
    }
    let dim = x.dim();
    let mut out = params.clone();
    let mut means = out.means.as_slice().to_vec();
    means[v * dim..(v + 1) * dim].copy_from_slice(x.row(row));
    out.means = VectorSet::new(dim, means);
    out.concentrations[v] = global_kappa;
    out.weights[v] = 1.0 / x.len() as f64;
    let total: f64 = out.weights.iter().sum();
    out.weights.iter_mut().for_each(|w| *w /= total);
    Some(out)
}

fn run_em(x: &VectorSet, init: MixtureParams, config: &FitConfig) -> Result<FitOutcome, FitError> {
    let m = x.len();
    let dim = x.dim();
    let global_kappa = estimate_kappa(mean_resultant(x), dim, config.kappa_max);

    let mut params = init;
    let mut stats = sweep(x, &params);
    if !stats.log_likelihood.is_finite() {
        return Err(FitError::NonFiniteLogLikelihood { iteration: 0 });
    }
    let mut trace = vec![stats.log_likelihood];
    let mut iterations = 0;
    for it in 1..=config.max_iters {
        let mut next = m_step(&stats, &params, m, config);
        let mut next_stats = sweep(x, &next);
        if let Some(repaired) = repair_starved(x, &stats, &next, global_kappa) {
            let repaired_stats = sweep(x, &repaired);
            if repaired_stats.log_likelihood >= next_stats.log_likelihood {
                next = repaired;
                next_stats = repaired_stats;
            }
        }
        let ll = next_stats.log_likelihood;
        if !ll.is_finite() {
            return Err(FitError::NonFiniteLogLikelihood { iteration: it });
        }
        let prev_ll = stats.log_likelihood;
        trace.push(ll);
        params = next;
        stats = next_stats;
        iterations = it;
        if ll - prev_ll < config.rel_tol * prev_ll.abs() {
            break;
        }
    }
    let dictionary = VcDictionary::new(
        params.means,
        params.concentrations,
        params.weights,
        stats.log_likelihood,
        iterations,
    )?;
    Ok(FitOutcome {
        dictionary,
        log_likelihood_trace: trace,
    })
}

/// Maximum-posterior component per vector; ties go to the smaller index.
pub fn assign_hard(vectors: &VectorSet, dict: &VcDictionary) -> Result<Vec<usize>, FitError> {
    if vectors.dim() != dict.dim() {
        return Err(FitError::DimensionMismatch {
            expected: dict.dim(),
            got: vectors.dim(),
        });
    }
    let priors = dict.log_priors();
    Ok(vectors
        .rows()
        .map(|row| {
            let mut best = (0, f64::NEG_INFINITY);
            for (v, &lp) in priors.iter().enumerate() {
                let score = lp + dict.concentrations()[v] * dot(dict.mean(v), row);
                if score > best.1 {
                    best = (v, score);
                }
            }
            best.0
        })
        .collect())
}
