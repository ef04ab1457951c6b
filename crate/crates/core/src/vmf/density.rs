use std::f64::consts::PI;

use super::FitError;
use crate::bessel::log_bessel_i;
use crate::vectors::dot;

/// Largest concentration any density evaluation accepts.
pub const KAPPA_CEILING: f64 = 1e8;

/// `ln C_d(κ) = (d/2 − 1) ln κ − (d/2) ln 2π − ln I_{d/2−1}(κ)`.
pub fn log_normalizer(dim: usize, kappa: f64) -> f64 {
    let half = dim as f64 / 2.0;
    let order = half - 1.0;
    order * kappa.ln() - half * (2.0 * PI).ln() - log_bessel_i(order, kappa)
}

/// Log-density of the vMF distribution with mean `mu` and concentration
/// `kappa` at the unit vector `f`.
pub fn vmf_log_density(f: &[f64], mu: &[f64], kappa: f64) -> Result<f64, FitError> {
    if f.len() != mu.len() {
        return Err(FitError::DimensionMismatch {
            expected: mu.len(),
            got: f.len(),
        });
    }
    if f.len() < 2 {
        return Err(FitError::DimensionTooSmall(f.len()));
    }
    if !(kappa > 0.0 && kappa <= KAPPA_CEILING) {
        return Err(FitError::KappaOutOfRange(kappa));
    }
    Ok(log_normalizer(f.len(), kappa) + kappa * dot(mu, f))
}
