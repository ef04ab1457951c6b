//! Naive reference implementations used as test oracles. Everything here is
//! written as directly as possible from the defining formulas and shares no
//! code with the library beyond its data types.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vcshot::store::{FeatureGrid, FeatureStore};
use vcshot::{VcDictionary, VcEncoding, VectorSet};

use std::collections::BTreeMap;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        // Box-Muller, independent of the library's sampler
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        if dot(&v, &v) > 1e-12 {
            return unit(&v);
        }
    }
}

/// ln of the d = 3 vMF density, `κ / (4π sinh κ) · exp(κ μᵀf)`, written so
/// that large κ does not overflow.
pub fn log_vmf3(f: &[f64], mu: &[f64], kappa: f64) -> f64 {
    let ln_2sinh = kappa + (-(-2.0 * kappa).exp()).ln_1p();
    kappa.ln() - (2.0 * std::f64::consts::PI).ln() - ln_2sinh + kappa * dot(mu, f)
}

/// Index into a position-major, VC-fastest bit tensor.
pub fn at(w: usize, v: usize, r: usize, c: usize, k: usize) -> usize {
    (r * w + c) * v + k
}

pub fn random_bits(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<bool> {
    (0..n).map(|_| rng.gen_bool(density)).collect()
}

pub fn encoding(h: usize, w: usize, v: usize, bits: Vec<bool>) -> VcEncoding {
    VcEncoding::from_bits(h, w, v, bits, 0.5).unwrap()
}

/// One directional term of the kernel: fraction of b's set bits that find a
/// set bit of the same VC in b' within Chebyshev distance `radius`.
fn directed(b: &VcEncoding, bp: &VcEncoding, radius: usize) -> f64 {
    let (h, w, v) = b.shape();
    let mut hit = 0usize;
    let mut total = 0usize;
    for r in 0..h {
        for c in 0..w {
            for k in 0..v {
                if !b.get(r, c, k) {
                    continue;
                }
                total += 1;
                let mut found = false;
                for rr in 0..h {
                    for cc in 0..w {
                        let near = r.abs_diff(rr) <= radius && c.abs_diff(cc) <= radius;
                        if near && bp.get(rr, cc, k) {
                            found = true;
                        }
                    }
                }
                hit += usize::from(found);
            }
        }
    }
    hit as f64 / total as f64
}

pub fn naive_kernel(b: &VcEncoding, bp: &VcEncoding, radius: usize) -> f64 {
    0.5 * (directed(b, bp, radius) + directed(bp, b, radius))
}

/// Dense 2D truncated Gaussian with the weights renormalized over the part of
/// the window that lies inside the map.
pub fn dense_smooth(map: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return map.to_vec();
    }
    let rad = (3.0 * sigma).ceil() as i64;
    let mut out = vec![0.0; h * w];
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            let (mut acc, mut norm) = (0.0, 0.0);
            for dr in -rad..=rad {
                for dc in -rad..=rad {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= h as i64 || cc >= w as i64 {
                        continue;
                    }
                    let wt = (-((dr * dr + dc * dc) as f64) / (2.0 * sigma * sigma)).exp();
                    acc += wt * map[(rr * w as i64 + cc) as usize];
                    norm += wt;
                }
            }
            out[(r * w as i64 + c) as usize] = acc / norm;
        }
    }
    out
}

/// Per-category θ maps built directly from the definition: frequency, then
/// dense smoothing per VC channel, then clamping.
pub fn naive_theta(
    support: &[(VcEncoding, u32)],
    sigma: f64,
    eps: f64,
) -> BTreeMap<u32, Vec<f64>> {
    let (h, w, v) = support[0].0.shape();
    let mut out = BTreeMap::new();
    let cats: std::collections::BTreeSet<u32> = support.iter().map(|s| s.1).collect();
    for cat in cats {
        let members: Vec<&VcEncoding> = support.iter().filter(|s| s.1 == cat).map(|s| &s.0).collect();
        let mut theta = vec![0.0; h * w * v];
        for k in 0..v {
            let mut map = vec![0.0; h * w];
            for r in 0..h {
                for c in 0..w {
                    let ones = members.iter().filter(|e| e.get(r, c, k)).count();
                    map[r * w + c] = ones as f64 / members.len() as f64;
                }
            }
            let smooth = dense_smooth(&map, h, w, sigma);
            for r in 0..h {
                for c in 0..w {
                    theta[at(w, v, r, c, k)] = smooth[r * w + c].clamp(eps, 1.0 - eps);
                }
            }
        }
        out.insert(cat, theta);
    }
    out
}

/// ln of the product-form Bernoulli likelihood.
pub fn naive_log_likelihood(b: &VcEncoding, theta: &[f64]) -> f64 {
    let mut p = 0.0;
    for (i, &bit) in b.bits().iter().enumerate() {
        p += if bit { theta[i].ln() } else { (1.0 - theta[i]).ln() };
    }
    p
}

pub fn naive_classify_lh(b: &VcEncoding, thetas: &BTreeMap<u32, Vec<f64>>) -> u32 {
    let mut best = (u32::MAX, f64::NEG_INFINITY);
    for (&cat, theta) in thetas {
        let ll = naive_log_likelihood(b, theta);
        if ll > best.1 {
            best = (cat, ll);
        }
    }
    best.0
}

/// Cosine distance `1 − fᵀμ / (‖f‖‖μ‖)`, or 1 for a degenerate feature.
pub fn naive_distance(f: &[f32], mu: &[f64]) -> f64 {
    let f: Vec<f64> = f.iter().map(|&x| f64::from(x)).collect();
    let nf = dot(&f, &f).sqrt();
    if nf < 1e-8 {
        return 1.0;
    }
    1.0 - dot(&f, mu) / (nf * dot(mu, mu).sqrt())
}

pub fn random_dictionary(rng: &mut ChaCha8Rng, v: usize, dim: usize) -> VcDictionary {
    let means: Vec<Vec<f64>> = (0..v).map(|_| gaussian_unit(rng, dim)).collect();
    VcDictionary::new(VectorSet::from_rows(&means), vec![1.0; v], vec![1.0 / v as f64; v], 0.0, 0).unwrap()
}

pub fn random_grid(rng: &mut ChaCha8Rng, id: &str, category: u32, h: u32, w: u32, c: u32, zero_frac: f64) -> FeatureGrid {
    let mut data = Vec::with_capacity((h * w * c) as usize);
    for _ in 0..h * w {
        let zero = rng.gen_bool(zero_frac);
        for _ in 0..c {
            data.push(if zero { 0.0 } else { rng.gen_range(-2.0f32..2.0) });
        }
    }
    FeatureGrid {
        image_id: id.to_string(),
        category_id: category,
        height: h,
        width: w,
        channels: c,
        data,
        rf_stride: 8,
        rf_size: 36,
        rf_offset: 4,
    }
}

/// A store of arbitrary shapes with unusual but finite floats and non-ASCII
/// identifiers.
pub fn random_store(rng: &mut ChaCha8Rng) -> FeatureStore {
    const SPECIAL: [f32; 8] = [0.0, -0.0, f32::MIN_POSITIVE, 1e-45, -1e-45, f32::MAX, f32::MIN, 1.0];
    let n_cats = rng.gen_range(1..5u32);
    let cat_ids: Vec<u32> = (0..n_cats).map(|i| i * 7 + rng.gen_range(0..7)).collect();
    let categories: BTreeMap<u32, String> = cat_ids
        .iter()
        .map(|&id| (id, format!("cat-{id}-{}", ["α", "β", "", "long name"][rng.gen_range(0..4)])))
        .collect();
    let n_grids = rng.gen_range(0..6);
    let grids = (0..n_grids)
        .map(|g| {
            let (h, w, c) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..6));
            let data = (0..h * w * c)
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        SPECIAL[rng.gen_range(0..SPECIAL.len())]
                    } else {
                        f32::from_bits(rng.gen::<u32>() & 0xbfff_ffff)
                    }
                })
                .collect();
            FeatureGrid {
                image_id: format!("img-{g}-ü"),
                category_id: cat_ids[rng.gen_range(0..cat_ids.len())],
                height: h,
                width: w,
                channels: c,
                data,
                rf_stride: rng.gen_range(1..32),
                rf_size: rng.gen_range(1..200),
                rf_offset: rng.gen_range(-50..50),
            }
        })
        .collect();
    FeatureStore::new(&format!("layer-{}", rng.gen::<u8>()), categories, grids).unwrap()
}
