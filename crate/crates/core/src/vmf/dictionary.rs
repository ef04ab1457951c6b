use std::io::{Read, Write};

use super::density::{log_normalizer, KAPPA_CEILING};
use super::FitError;
use crate::format::{put_f32, put_f64, put_u16, put_u32, ByteReader, FormatError};
use crate::vectors::{dot, norm, VectorSet};

pub const MAGIC: [u8; 4] = *b"VCDC";
pub const VERSION: u16 = 1;

/// A fitted vMF mixture. Each mean direction is one visual concept.
#[derive(Clone, Debug, PartialEq)]
pub struct VcDictionary {
    means: VectorSet,
    concentrations: Vec<f64>,
    weights: Vec<f64>,
    fitted_log_likelihood: f64,
    iterations_run: usize,
}

impl VcDictionary {
    pub fn new(
        means: VectorSet,
        concentrations: Vec<f64>,
        weights: Vec<f64>,
        fitted_log_likelihood: f64,
        iterations_run: usize,
    ) -> Result<Self, FitError> {
        let v = means.len();
        if v == 0 {
            return Err(FitError::InvalidDictionary("no components".into()));
        }
        if means.dim() < 2 {
            return Err(FitError::DimensionTooSmall(means.dim()));
        }
        if concentrations.len() != v || weights.len() != v {
            return Err(FitError::InvalidDictionary(format!(
                "{v} means but {} concentrations and {} weights",
                concentrations.len(),
                weights.len()
            )));
        }
        for (i, m) in means.rows().enumerate() {
            let n = norm(m);
            if (n - 1.0).abs() >= 1e-6 {
                return Err(FitError::InvalidDictionary(format!("mean {i} has norm {n}")));
            }
        }
        if let Some(&k) = concentrations
            .iter()
            .find(|&&k| !(k > 0.0 && k <= KAPPA_CEILING))
        {
            return Err(FitError::KappaOutOfRange(k));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(FitError::InvalidDictionary(format!(
                "weights must be non-negative and sum to 1 (sum {total})"
            )));
        }
        Ok(Self {
            means,
            concentrations,
            weights,
            fitted_log_likelihood,
            iterations_run,
        })
    }

    pub fn num_vcs(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means.dim()
    }

    pub fn means(&self) -> &VectorSet {
        &self.means
    }

    pub fn mean(&self, v: usize) -> &[f64] {
        self.means.row(v)
    }

    pub fn concentrations(&self) -> &[f64] {
        &self.concentrations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn fitted_log_likelihood(&self) -> f64 {
        self.fitted_log_likelihood
    }

    pub fn iterations_run(&self) -> usize {
        self.iterations_run
    }

    /// `ln α_v + ln C_d(κ_v)` per component.
    pub(crate) fn log_priors(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.concentrations)
            .map(|(&w, &k)| w.ln() + log_normalizer(self.dim(), k))
            .collect()
    }

    /// Posterior responsibilities of every component for the unit vector `f`.
    pub fn posterior(&self, f: &[f64]) -> Result<Vec<f64>, FitError> {
        if f.len() != self.dim() {
            return Err(FitError::DimensionMismatch {
                expected: self.dim(),
                got: f.len(),
            });
        }
        let mut logp: Vec<f64> = self
            .log_priors()
            .into_iter()
            .enumerate()
            .map(|(v, lp)| lp + self.concentrations[v] * dot(self.mean(v), f))
            .collect();
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in logp.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for x in logp.iter_mut() {
            *x /= total;
        }
        Ok(logp)
    }
}

/// Writes the VCDC encoding: magic, version, V, C, means, concentrations,
/// weights (all f32), fitted log-likelihood (f64).
pub fn write_dictionary<W: Write>(dict: &VcDictionary, mut dest: W) -> Result<(), FormatError> {
    let v = dict.num_vcs();
    let c = dict.dim();
    let mut out = Vec::with_capacity(16 + 4 * v * (c + 2) + 8);
    out.extend_from_slice(&MAGIC);
    put_u16(&mut out, VERSION);
    put_u32(&mut out, v as u32);
    put_u32(&mut out, c as u32);
    for &x in dict.means.as_slice() {
        put_f32(&mut out, x as f32);
    }
    for &k in &dict.concentrations {
        put_f32(&mut out, k as f32);
    }
    for &w in &dict.weights {
        put_f32(&mut out, w as f32);
    }
    put_f64(&mut out, dict.fitted_log_likelihood);
    dest.write_all(&out)?;
    dest.flush()?;
    Ok(())
}

/// Reads a VCDC file. Means and weights are renormalized in `f64` after the
/// `f32` round trip; the iteration count is not stored and reads back as 0.
pub fn read_dictionary<R: Read>(mut source: R) -> Result<VcDictionary, FormatError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut r = ByteReader::new(&bytes);
    let magic = r.take(4.min(bytes.len()))?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic {
            expected: MAGIC,
            found: magic.to_vec(),
        });
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let v = r.u32()? as usize;
    let c = r.u32()? as usize;
    let means = r.f32_vec(v.checked_mul(c).ok_or(FormatError::Truncated { offset: r.offset() })?)?;
    let kappas = r.f32_vec(v)?;
    let weights = r.f32_vec(v)?;
    let ll = r.f64()?;
    if r.remaining() > 0 {
        return Err(FormatError::TrailingBytes { offset: r.offset() });
    }
    if c < 2 || v == 0 {
        return Err(FormatError::Invalid(format!("V={v}, C={c}")));
    }
    let mut data: Vec<f64> = means.iter().map(|&x| f64::from(x)).collect();
    for row in data.chunks_exact_mut(c) {
        let n = norm(row);
        if !(n > 0.0) || !n.is_finite() {
            return Err(FormatError::Invalid("degenerate mean".into()));
        }
        row.iter_mut().for_each(|x| *x /= n);
    }
    let mut w: Vec<f64> = weights.iter().map(|&x| f64::from(x)).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(FormatError::Invalid("weights do not sum to a positive value".into()));
    }
    w.iter_mut().for_each(|x| *x /= total);
    VcDictionary::new(
        VectorSet::new(c, data),
        kappas.iter().map(|&k| f64::from(k)).collect(),
        w,
        ll,
        0,
    )
    .map_err(|e| FormatError::Invalid(e.to_string()))
}
