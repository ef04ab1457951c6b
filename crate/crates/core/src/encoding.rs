//! VC distances, binary VC-Encodings and the coverage-driven threshold search.

use std::io::{Read, Write};

use thiserror::Error;

use crate::format::{put_u32, ByteReader, FormatError};
use crate::store::{FeatureGrid, MIN_FEATURE_NORM};
use crate::vectors::dot;
use crate::vmf::VcDictionary;

/// Distance assigned to every VC at a degenerate (near-zero) feature.
pub const DEGENERATE_DISTANCE: f32 = 1.0;
pub const MAX_DISTANCE: f64 = 2.0;
pub const DEFAULT_COVERAGE_TARGET: f64 = 0.8;
pub const DEFAULT_THRESHOLD_STEP: f64 = 0.001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("grid has {grid} channels but the dictionary has dimension {dictionary}")]
    DimensionMismatch { grid: usize, dictionary: usize },
    #[error("threshold {0} outside [0, 2]")]
    ThresholdOutOfRange(f64),
    #[error("no threshold up to 2 reaches mean coverage {target}")]
    NoThresholdSatisfies { target: f64 },
    #[error("threshold search needs at least one distance tensor")]
    EmptyTrainingSet,
    #[error("coverage target {0} outside (0, 1]")]
    InvalidCoverageTarget(f64),
    #[error("threshold step {0} must be positive")]
    InvalidStep(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Cosine distances `d[p, v] = 1 − cos(f_p, μ_v)` over a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceTensor {
    pub height: usize,
    pub width: usize,
    pub num_vcs: usize,
    /// Position-major, `num_vcs` values per position.
    pub values: Vec<f32>,
}

impl DistanceTensor {
    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    pub fn get(&self, position: usize, vc: usize) -> f32 {
        self.values[position * self.num_vcs + vc]
    }

    pub fn at_position(&self, position: usize) -> &[f32] {
        &self.values[position * self.num_vcs..(position + 1) * self.num_vcs]
    }

    /// Smallest distance per position.
    pub fn min_per_position(&self) -> Vec<f32> {
        self.values
            .chunks_exact(self.num_vcs)
            .map(|c| c.iter().copied().fold(f32::INFINITY, f32::min))
            .collect()
    }
}

pub fn compute_distances(grid: &FeatureGrid, dict: &VcDictionary) -> Result<DistanceTensor, EncodingError> {
    let c = grid.channels as usize;
    if c != dict.dim() {
        return Err(EncodingError::DimensionMismatch {
            grid: c,
            dictionary: dict.dim(),
        });
    }
    let v = dict.num_vcs();
    let mean_norms: Vec<f64> = dict.means().rows().map(crate::vectors::norm).collect();
    let mut values = Vec::with_capacity(grid.positions() * v);
    let mut f = vec![0.0f64; c];
    for p in 0..grid.positions() {
        for (dst, &src) in f.iter_mut().zip(grid.feature_at(p)) {
            *dst = f64::from(src);
        }
        let fnorm = dot(&f, &f).sqrt();
        if fnorm < MIN_FEATURE_NORM {
            values.extend(std::iter::repeat(DEGENERATE_DISTANCE).take(v));
            continue;
        }
        for (vc, mean) in dict.means().rows().enumerate() {
            let cos = dot(&f, mean) / (fnorm * mean_norms[vc]);
            values.push((1.0 - cos).clamp(0.0, MAX_DISTANCE) as f32);
        }
    }
    Ok(DistanceTensor {
        height: grid.height as usize,
        width: grid.width as usize,
        num_vcs: v,
        values,
    })
}

/// Binary VC-Encoding `b[p, v] = d[p, v] < T` with its coverage statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct VcEncoding {
    height: usize,
    width: usize,
    num_vcs: usize,
    bits: Vec<bool>,
    threshold: f64,
    coverage: f64,
    firerate: f64,
}

impl VcEncoding {
    /// Builds an encoding directly from bits. The threshold is recorded as-is;
    /// coverage and firerate are recomputed.
    pub fn from_bits(
        height: usize,
        width: usize,
        num_vcs: usize,
        bits: Vec<bool>,
        threshold: f64,
    ) -> Result<Self, EncodingError> {
        if height == 0 || width == 0 || num_vcs == 0 || bits.len() != height * width * num_vcs {
            return Err(EncodingError::ShapeMismatch(format!(
                "{} bits for a {height}x{width}x{num_vcs} encoding",
                bits.len()
            )));
        }
        let (coverage, firerate) = coverage_and_firerate(&bits, num_vcs);
        Ok(Self {
            height,
            width,
            num_vcs,
            bits,
            threshold,
            coverage,
            firerate,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_vcs(&self) -> usize {
        self.num_vcs
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.num_vcs)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize, vc: usize) -> bool {
        self.bits[(row * self.width + col) * self.num_vcs + vc]
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn firerate(&self) -> f64 {
        self.firerate
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Coverage = share of positions with any firing VC; firerate = firing VCs
/// per position.
pub fn coverage_and_firerate(bits: &[bool], num_vcs: usize) -> (f64, f64) {
    let positions = bits.len() / num_vcs;
    let mut covered = 0usize;
    let mut fired = 0usize;
    for chunk in bits.chunks_exact(num_vcs) {
        let n = chunk.iter().filter(|&&b| b).count();
        fired += n;
        covered += usize::from(n > 0);
    }
    (
        covered as f64 / positions as f64,
        fired as f64 / positions as f64,
    )
}

pub fn encode(distances: &DistanceTensor, threshold: f64) -> Result<VcEncoding, EncodingError> {
    if !(0.0..=MAX_DISTANCE).contains(&threshold) {
        return Err(EncodingError::ThresholdOutOfRange(threshold));
    }
    let bits = distances
        .values
        .iter()
        .map(|&d| f64::from(d) < threshold)
        .collect();
    VcEncoding::from_bits(
        distances.height,
        distances.width,
        distances.num_vcs,
        bits,
        threshold,
    )
}

/// Per-image coverage as a step function of the threshold.
struct CoverageProfile {
    sorted_min: Vec<f64>,
}

impl CoverageProfile {
    fn new(d: &DistanceTensor) -> Self {
        let mut sorted_min: Vec<f64> = d.min_per_position().into_iter().map(f64::from).collect();
        sorted_min.sort_by(f64::total_cmp);
        Self { sorted_min }
    }

    fn coverage(&self, threshold: f64) -> f64 {
        let covered = self.sorted_min.partition_point(|&m| m < threshold);
        covered as f64 / self.sorted_min.len() as f64
    }
}

/// The `i`-th point of the threshold grid.
pub fn grid_threshold(i: usize, step: f64) -> f64 {
    (i as f64 * step).min(MAX_DISTANCE)
}

/// Number of grid points in `[0, 2]`.
pub fn grid_len(step: f64) -> usize {
    (MAX_DISTANCE / step + 1e-9).floor() as usize + 1
}

/// Mean per-image coverage of `distances` at `threshold`.
pub fn mean_coverage(distances: &[DistanceTensor], threshold: f64) -> f64 {
    let total: f64 = distances
        .iter()
        .map(|d| CoverageProfile::new(d).coverage(threshold))
        .sum();
    total / distances.len() as f64
}

/// Smallest grid threshold `T ∈ {0, step, 2·step, …, 2}` whose mean
/// per-image coverage reaches `coverage_target`.
pub fn search_threshold(
    training: &[DistanceTensor],
    coverage_target: f64,
    step: f64,
) -> Result<f64, EncodingError> {
    if training.is_empty() {
        return Err(EncodingError::EmptyTrainingSet);
    }
    if !(coverage_target > 0.0 && coverage_target <= 1.0) {
        return Err(EncodingError::InvalidCoverageTarget(coverage_target));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(EncodingError::InvalidStep(step));
    }
    let profiles: Vec<CoverageProfile> = training.iter().map(CoverageProfile::new).collect();
    // summed in image order, so the mean is monotone in T
    let passes = |i: usize| {
        let t = grid_threshold(i, step);
        let total: f64 = profiles.iter().map(|p| p.coverage(t)).sum();
        total / profiles.len() as f64 >= coverage_target
    };
    let n = grid_len(step);
    if !passes(n - 1) {
        return Err(EncodingError::NoThresholdSatisfies {
            target: coverage_target,
        });
    }
    let (mut lo, mut hi) = (0usize, n - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(grid_threshold(lo, step))
}

pub const BITSET_MAGIC: [u8; 4] = *b"VCBE";

/// Writes an encoding as "VCBE", u32 H, W, V, then the bits packed
/// position-major with v fastest, LSB first within each byte.
pub fn write_bitset<W: Write>(enc: &VcEncoding, mut dest: W) -> Result<(), FormatError> {
    let mut out = Vec::with_capacity(16 + enc.bits.len().div_ceil(8));
    out.extend_from_slice(&BITSET_MAGIC);
    put_u32(&mut out, enc.height as u32);
    put_u32(&mut out, enc.width as u32);
    put_u32(&mut out, enc.num_vcs as u32);
    let mut packed = vec![0u8; enc.bits.len().div_ceil(8)];
    for (i, _) in enc.bits.iter().enumerate().filter(|(_, &b)| b) {
        packed[i / 8] |= 1 << (i % 8);
    }
    out.extend_from_slice(&packed);
    dest.write_all(&out)?;
    dest.flush()?;
    Ok(())
}

/// Reads a VCBE bitset. The file carries no threshold, so the returned
/// encoding reports a threshold of NaN.
pub fn read_bitset<R: Read>(mut source: R) -> Result<VcEncoding, FormatError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut r = ByteReader::new(&bytes);
    let magic = r.take(4.min(bytes.len()))?;
    if magic != BITSET_MAGIC {
        return Err(FormatError::BadMagic {
            expected: BITSET_MAGIC,
            found: magic.to_vec(),
        });
    }
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let v = r.u32()? as usize;
    let n = h
        .checked_mul(w)
        .and_then(|x| x.checked_mul(v))
        .ok_or_else(|| FormatError::Invalid("shape overflows".into()))?;
    let packed = r.take(n.div_ceil(8))?;
    if r.remaining() > 0 {
        return Err(FormatError::TrailingBytes { offset: r.offset() });
    }
    if n % 8 != 0 && packed[n / 8] >> (n % 8) != 0 {
        return Err(FormatError::Invalid("nonzero padding bits".into()));
    }
    let bits = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
    VcEncoding::from_bits(h, w, v, bits, f64::NAN).map_err(|e| FormatError::Invalid(e.to_string()))
}
