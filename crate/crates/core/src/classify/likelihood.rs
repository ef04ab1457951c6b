//! Factorizable Bernoulli likelihood over VC-Encodings.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::smoothing::{gaussian_smooth, Border};
use super::ClassifyError;
use crate::encoding::VcEncoding;

pub const DEFAULT_SIGMA: f64 = 1.2;
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Per-category Bernoulli maps `θ_y[p, v]`, smoothed and clamped.
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodModel {
    categories: Vec<u32>,
    theta: Vec<Vec<f64>>,
    shape: (usize, usize, usize),
    sigma: f64,
    epsilon: f64,
}

impl LikelihoodModel {
    /// Ascending category ids.
    pub fn categories(&self) -> &[u32] {
        &self.categories
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Position-major map for one category, `None` if the id is unknown.
    pub fn theta(&self, category: u32) -> Option<&[f64]> {
        self.categories
            .binary_search(&category)
            .ok()
            .map(|i| self.theta[i].as_slice())
    }
}

/// Estimates `θ_y` as per-position firing frequencies, smooths each VC
/// channel spatially with a truncated Gaussian (border-renormalized), and
/// clamps to `[ε, 1−ε]`. `sigma == 0` disables smoothing.
pub fn fit_likelihood(
    support: &[(VcEncoding, u32)],
    sigma: f64,
    epsilon: f64,
) -> Result<LikelihoodModel, ClassifyError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(ClassifyError::InvalidParameter(format!("sigma {sigma}")));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(ClassifyError::InvalidParameter(format!("epsilon {epsilon}")));
    }
    let first = support.first().ok_or(ClassifyError::EmptySupport)?;
    let shape = first.0.shape();
    let (h, w, v) = shape;
    let mut by_category: BTreeMap<u32, Vec<&VcEncoding>> = BTreeMap::new();
    for (enc, cat) in support {
        if enc.shape() != shape {
            return Err(ClassifyError::ShapeMismatch {
                expected: shape,
                got: enc.shape(),
            });
        }
        by_category.entry(*cat).or_default().push(enc);
    }

    let mut categories = Vec::with_capacity(by_category.len());
    let mut theta = Vec::with_capacity(by_category.len());
    let mut channel = vec![0.0; h * w];
    for (cat, encs) in by_category {
        let n = encs.len() as f64;
        let mut counts = vec![0usize; h * w * v];
        for e in &encs {
            for (c, &b) in counts.iter_mut().zip(e.bits()) {
                *c += usize::from(b);
            }
        }
        let raw: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let mut map = vec![0.0; h * w * v];
        for vc in 0..v {
            for p in 0..h * w {
                channel[p] = raw[p * v + vc];
            }
            let smoothed = gaussian_smooth(&channel, h, w, sigma, Border::Renormalize);
            for p in 0..h * w {
                map[p * v + vc] = smoothed[p].clamp(epsilon, 1.0 - epsilon);
            }
        }
        categories.push(cat);
        theta.push(map);
    }
    Ok(LikelihoodModel {
        categories,
        theta,
        shape,
        sigma,
        epsilon,
    })
}

/// `Σ_{p,v} ln(b·θ + (1−b)(1−θ))`.
pub fn log_likelihood(b: &VcEncoding, theta: &[f64]) -> Result<f64, ClassifyError> {
    if theta.len() != b.bits().len() {
        return Err(ClassifyError::ThetaLength {
            expected: b.bits().len(),
            got: theta.len(),
        });
    }
    Ok(b.bits()
        .iter()
        .zip(theta)
        .map(|(&bit, &t)| if bit { t.ln() } else { (1.0 - t).ln() })
        .sum())
}

/// Maximum-likelihood category; ties go to the smallest id.
pub fn classify_lh(query: &VcEncoding, model: &LikelihoodModel) -> Result<u32, ClassifyError> {
    if query.shape() != model.shape {
        return Err(ClassifyError::ShapeMismatch {
            expected: model.shape,
            got: query.shape(),
        });
    }
    let mut best: Option<(f64, u32)> = None;
    for (cat, theta) in model.categories.iter().zip(&model.theta) {
        let ll = log_likelihood(query, theta)?;
        if best.map_or(true, |(b, _)| ll > b) {
            best = Some((ll, *cat));
        }
    }
    best.map(|(_, c)| c).ok_or(ClassifyError::EmptySupport)
}

/// One cell of a per-VC log-likelihood contribution map.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Contribution {
    pub category_id: u32,
    pub row: usize,
    pub col: usize,
    pub vc: usize,
    pub contribution: f64,
}

/// Every term of `log_likelihood(query, θ_y)` for every category.
pub fn contributions(query: &VcEncoding, model: &LikelihoodModel) -> Result<Vec<Contribution>, ClassifyError> {
    if query.shape() != model.shape {
        return Err(ClassifyError::ShapeMismatch {
            expected: model.shape,
            got: query.shape(),
        });
    }
    let (_, w, v) = model.shape;
    let mut out = Vec::with_capacity(model.categories.len() * query.bits().len());
    for (cat, theta) in model.categories.iter().zip(&model.theta) {
        for (i, (&bit, &t)) in query.bits().iter().zip(theta).enumerate() {
            let p = i / v;
            out.push(Contribution {
                category_id: *cat,
                row: p / w,
                col: p % w,
                vc: i % v,
                contribution: if bit { t.ln() } else { (1.0 - t).ln() },
            });
        }
    }
    Ok(out)
}

pub fn write_contributions_csv<W: Write>(rows: &[Contribution], dest: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(dest);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}
