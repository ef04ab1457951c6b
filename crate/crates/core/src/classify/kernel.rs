//! Spatially tolerant similarity between VC-Encodings and the
//! nearest-neighbor classifier built on it.

use super::ClassifyError;
use crate::encoding::VcEncoding;

/// Chebyshev neighborhood `n(p)` of a lattice position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NeighborhoodSpec {
    pub radius: usize,
}

impl NeighborhoodSpec {
    pub fn new(radius: usize) -> Self {
        Self { radius }
    }
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        Self { radius: 1 }
    }
}

/// `dilated[p, v]` = any bit of channel `v` set within `radius` of `p`
/// (clipped at the lattice border).
pub fn dilate(enc: &VcEncoding, radius: usize) -> Vec<bool> {
    let (h, w, v) = enc.shape();
    if radius == 0 {
        return enc.bits().to_vec();
    }
    // separable max-filter: rows, then columns
    let mut horiz = vec![false; h * w * v];
    for r in 0..h {
        for c in 0..w {
            let lo = c.saturating_sub(radius);
            let hi = (c + radius).min(w - 1);
            for vc in 0..v {
                horiz[(r * w + c) * v + vc] = (lo..=hi).any(|cc| enc.get(r, cc, vc));
            }
        }
    }
    let mut out = vec![false; h * w * v];
    for r in 0..h {
        let lo = r.saturating_sub(radius);
        let hi = (r + radius).min(h - 1);
        for c in 0..w {
            for vc in 0..v {
                out[(r * w + c) * v + vc] = (lo..=hi).any(|rr| horiz[(rr * w + c) * v + vc]);
            }
        }
    }
    out
}

fn check_pair(a: &VcEncoding, b: &VcEncoding, nbhd: NeighborhoodSpec) -> Result<(), ClassifyError> {
    if a.shape() != b.shape() {
        return Err(ClassifyError::ShapeMismatch {
            expected: a.shape(),
            got: b.shape(),
        });
    }
    let (h, w, _) = a.shape();
    if nbhd.radius > h.min(w) {
        return Err(ClassifyError::RadiusTooLarge {
            radius: nbhd.radius,
            limit: h.min(w),
        });
    }
    Ok(())
}

/// Fraction of `a`'s set bits that find a matching bit of `b` nearby.
fn directed(a: &VcEncoding, b_dilated: &[bool]) -> Result<f64, ClassifyError> {
    let total = a.count_ones();
    if total == 0 {
        return Err(ClassifyError::EmptyEncoding);
    }
    let hits = a
        .bits()
        .iter()
        .zip(b_dilated)
        .filter(|(&x, &y)| x && y)
        .count();
    Ok(hits as f64 / total as f64)
}

/// `K(b, b') = ½ (Σ b·maxₙ b' / Σ b + Σ b'·maxₙ b / Σ b')`.
pub fn similarity(b: &VcEncoding, b_prime: &VcEncoding, nbhd: NeighborhoodSpec) -> Result<f64, ClassifyError> {
    check_pair(b, b_prime, nbhd)?;
    let forward = directed(b, &dilate(b_prime, nbhd.radius))?;
    let backward = directed(b_prime, &dilate(b, nbhd.radius))?;
    Ok(0.5 * (forward + backward))
}

/// Category of the most similar support example; ties go to the earliest.
pub fn classify_nn(
    query: &VcEncoding,
    support: &[(VcEncoding, u32)],
    nbhd: NeighborhoodSpec,
) -> Result<u32, ClassifyError> {
    if support.is_empty() {
        return Err(ClassifyError::EmptySupport);
    }
    for (s, _) in support {
        check_pair(query, s, nbhd)?;
    }
    let query_total = query.count_ones();
    if query_total == 0 {
        return Err(ClassifyError::EmptyEncoding);
    }
    let query_dilated = dilate(query, nbhd.radius);
    let mut best: Option<(f64, u32)> = None;
    for (s, category) in support {
        let forward = directed(query, &dilate(s, nbhd.radius))?;
        let backward = directed(s, &query_dilated)?;
        let k = 0.5 * (forward + backward);
        if best.map_or(true, |(b, _)| k > b) {
            best = Some((k, *category));
        }
    }
    Ok(best.expect("non-empty support").1)
}
