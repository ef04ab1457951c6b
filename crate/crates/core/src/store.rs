//! Feature-grid container (VCFS), validation, and vector pooling.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "VCFS" | version u16 (=1)
//! layer_name: u16 len + UTF-8
//! u32 category count, then per category: u32 id, u16 len + UTF-8 name
//! u32 grid count, then per grid:
//!     u16 len + UTF-8 image_id, u32 category_id, u32 H, u32 W, u32 C,
//!     i32 rf_offset, u32 rf_stride, u32 rf_size,
//!     H*W*C f32, row-major over positions, channels contiguous
//! ```

use std::collections::{BTreeMap, HashSet};
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::format::{put_f32, put_i32, put_u16, put_u32, ByteReader, Short};
use crate::vectors::VectorSet;

pub const MAGIC: [u8; 4] = *b"VCFS";
pub const VERSION: u16 = 1;

/// Feature vectors shorter than this are treated as degenerate.
pub const MIN_FEATURE_NORM: f64 = 1e-8;

/// One image's lattice of feature vectors plus its receptive-field mapping.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    pub image_id: String,
    pub category_id: u32,
    pub height: u32,
    pub width: u32,
    pub channels: u32,
    /// Position-major, `channels` values per position.
    pub data: Vec<f32>,
    pub rf_stride: u32,
    pub rf_size: u32,
    pub rf_offset: i32,
}

impl FeatureGrid {
    pub fn positions(&self) -> usize {
        self.height as usize * self.width as usize
    }

    pub fn feature(&self, row: usize, col: usize) -> &[f32] {
        let c = self.channels as usize;
        let p = row * self.width as usize + col;
        &self.data[p * c..(p + 1) * c]
    }

    pub fn feature_at(&self, position: usize) -> &[f32] {
        let c = self.channels as usize;
        &self.data[position * c..(position + 1) * c]
    }

    /// Input-pixel coordinates `(x, y)` of the receptive-field center of a
    /// lattice cell.
    pub fn to_input_coords(&self, row: usize, col: usize) -> (i64, i64) {
        let stride = i64::from(self.rf_stride);
        let offset = i64::from(self.rf_offset);
        (offset + stride * col as i64, offset + stride * row as i64)
    }

    fn expected_len(&self) -> Option<usize> {
        (self.height as usize)
            .checked_mul(self.width as usize)?
            .checked_mul(self.channels as usize)
    }
}

/// A broken store invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantViolation {
    #[error("grid {image_id:?} has category {category_id} missing from the category table")]
    UnknownCategory { image_id: String, category_id: u32 },
    #[error("duplicate image id {0:?}")]
    DuplicateImageId(String),
    #[error("duplicate category id {0}")]
    DuplicateCategoryId(u32),
    #[error("grid {image_id:?} has a zero dimension")]
    ZeroDimension { image_id: String },
    #[error("grid {image_id:?} has rf_stride or rf_size of zero")]
    ZeroReceptiveField { image_id: String },
    #[error("grid {image_id:?} holds {actual} floats, expected {expected}")]
    DataLength {
        image_id: String,
        expected: usize,
        actual: usize,
    },
    #[error("grid {image_id:?} has a non-finite value at float index {index}")]
    NonFinite { image_id: String, index: usize },
    #[error("string of {0} bytes exceeds the u16 length prefix")]
    StringTooLong(usize),
    #[error("count {0} exceeds the u32 range")]
    CountTooLarge(usize),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("bad magic at offset 0: expected \"VCFS\", found {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported version {version} at offset 4")]
    UnsupportedVersion { version: u16 },
    #[error("truncated payload at offset {offset}")]
    Truncated { offset: u64 },
    #[error("invalid UTF-8 string at offset {offset}")]
    InvalidUtf8 { offset: u64 },
    #[error("{count} trailing bytes after the last grid at offset {offset}")]
    TrailingBytes { offset: u64, count: usize },
    #[error("non-finite value in grid {image_id:?} at offset {offset}")]
    NonFinite { image_id: String, offset: u64 },
    #[error("duplicate image id {image_id:?} at offset {offset}")]
    DuplicateImageId { image_id: String, offset: u64 },
    #[error("invariant violation{}: {violation}", fmt_offset(*.offset))]
    Invariant {
        violation: InvariantViolation,
        offset: Option<u64>,
    },
    #[error("grids have mixed channel counts ({first} and {other})")]
    MixedChannels { first: u32, other: u32 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn fmt_offset(offset: Option<u64>) -> String {
    offset.map(|o| format!(" at offset {o}")).unwrap_or_default()
}

impl From<Short> for StoreError {
    fn from(s: Short) -> Self {
        StoreError::Truncated { offset: s.offset }
    }
}

impl From<InvariantViolation> for StoreError {
    fn from(violation: InvariantViolation) -> Self {
        StoreError::Invariant {
            violation,
            offset: None,
        }
    }
}

/// A validated, immutable collection of feature grids for one CNN layer.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStore {
    layer_name: String,
    categories: BTreeMap<u32, String>,
    grids: Vec<FeatureGrid>,
}

impl FeatureStore {
    pub fn new(
        layer_name: impl Into<String>,
        categories: BTreeMap<u32, String>,
        grids: Vec<FeatureGrid>,
    ) -> Result<Self, StoreError> {
        let store = Self {
            layer_name: layer_name.into(),
            categories,
            grids,
        };
        store.validate()?;
        Ok(store)
    }

    pub fn version(&self) -> u16 {
        VERSION
    }

    pub fn layer_name(&self) -> &str {
        &self.layer_name
    }

    pub fn categories(&self) -> &BTreeMap<u32, String> {
        &self.categories
    }

    pub fn grids(&self) -> &[FeatureGrid] {
        &self.grids
    }

    pub fn grid_by_id(&self, image_id: &str) -> Option<&FeatureGrid> {
        self.grids.iter().find(|g| g.image_id == image_id)
    }

    /// Grid indices per category, in store order.
    pub fn indices_by_category(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut out: BTreeMap<u32, Vec<usize>> =
            self.categories.keys().map(|&c| (c, Vec::new())).collect();
        for (i, g) in self.grids.iter().enumerate() {
            out.entry(g.category_id).or_default().push(i);
        }
        out
    }

    pub fn into_parts(self) -> (String, BTreeMap<u32, String>, Vec<FeatureGrid>) {
        (self.layer_name, self.categories, self.grids)
    }

    fn validate(&self) -> Result<(), InvariantViolation> {
        check_string(&self.layer_name)?;
        check_count(self.categories.len())?;
        check_count(self.grids.len())?;
        for name in self.categories.values() {
            check_string(name)?;
        }
        let mut seen = HashSet::with_capacity(self.grids.len());
        for g in &self.grids {
            check_grid(g, &self.categories)?;
            if !seen.insert(g.image_id.as_str()) {
                return Err(InvariantViolation::DuplicateImageId(g.image_id.clone()));
            }
        }
        Ok(())
    }
}

fn check_string(s: &str) -> Result<(), InvariantViolation> {
    if s.len() > usize::from(u16::MAX) {
        return Err(InvariantViolation::StringTooLong(s.len()));
    }
    Ok(())
}

fn check_count(n: usize) -> Result<(), InvariantViolation> {
    if u32::try_from(n).is_err() {
        return Err(InvariantViolation::CountTooLarge(n));
    }
    Ok(())
}

fn check_grid(
    g: &FeatureGrid,
    categories: &BTreeMap<u32, String>,
) -> Result<(), InvariantViolation> {
    check_string(&g.image_id)?;
    if g.height == 0 || g.width == 0 || g.channels == 0 {
        return Err(InvariantViolation::ZeroDimension {
            image_id: g.image_id.clone(),
        });
    }
    if g.rf_stride == 0 || g.rf_size == 0 {
        return Err(InvariantViolation::ZeroReceptiveField {
            image_id: g.image_id.clone(),
        });
    }
    let expected = g.expected_len().unwrap_or(usize::MAX);
    if g.data.len() != expected {
        return Err(InvariantViolation::DataLength {
            image_id: g.image_id.clone(),
            expected,
            actual: g.data.len(),
        });
    }
    if let Some(index) = g.data.iter().position(|x| !x.is_finite()) {
        return Err(InvariantViolation::NonFinite {
            image_id: g.image_id.clone(),
            index,
        });
    }
    if !categories.contains_key(&g.category_id) {
        return Err(InvariantViolation::UnknownCategory {
            image_id: g.image_id.clone(),
            category_id: g.category_id,
        });
    }
    Ok(())
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u16(out, s.len() as u16);
    out.extend_from_slice(s.as_bytes());
}

/// Serializes a store to its VCFS byte image.
pub fn to_bytes(store: &FeatureStore) -> Vec<u8> {
    let payload: usize = store.grids.iter().map(|g| g.data.len() * 4 + 40).sum();
    let mut out = Vec::with_capacity(64 + payload);
    out.extend_from_slice(&MAGIC);
    put_u16(&mut out, VERSION);
    put_str(&mut out, &store.layer_name);
    put_u32(&mut out, store.categories.len() as u32);
    for (&id, name) in &store.categories {
        put_u32(&mut out, id);
        put_str(&mut out, name);
    }
    put_u32(&mut out, store.grids.len() as u32);
    for g in &store.grids {
        put_str(&mut out, &g.image_id);
        put_u32(&mut out, g.category_id);
        put_u32(&mut out, g.height);
        put_u32(&mut out, g.width);
        put_u32(&mut out, g.channels);
        put_i32(&mut out, g.rf_offset);
        put_u32(&mut out, g.rf_stride);
        put_u32(&mut out, g.rf_size);
        for &x in &g.data {
            put_f32(&mut out, x);
        }
    }
    out
}

/// Writes the VCFS encoding of `store`. The store is re-validated first, so
/// nothing is written for an invalid store.
pub fn write_store<W: Write>(store: &FeatureStore, mut dest: W) -> Result<(), StoreError> {
    store.validate()?;
    dest.write_all(&to_bytes(store))?;
    dest.flush()?;
    Ok(())
}

pub fn read_store<R: Read>(mut source: R) -> Result<FeatureStore, StoreError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

fn read_str(r: &mut ByteReader<'_>) -> Result<String, StoreError> {
    let len = r.u16()? as usize;
    let offset = r.offset();
    let raw = r.take(len)?;
    String::from_utf8(raw.to_vec()).map_err(|_| StoreError::InvalidUtf8 { offset })
}

fn at(violation: InvariantViolation, offset: u64) -> StoreError {
    StoreError::Invariant {
        violation,
        offset: Some(offset),
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<FeatureStore, StoreError> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4.min(bytes.len()))?;
    if magic != MAGIC {
        return Err(StoreError::BadMagic {
            found: magic.to_vec(),
        });
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(StoreError::UnsupportedVersion { version });
    }
    let layer_name = read_str(&mut r)?;

    let n_categories = r.u32()?;
    let mut categories = BTreeMap::new();
    for _ in 0..n_categories {
        let offset = r.offset();
        let id = r.u32()?;
        let name = read_str(&mut r)?;
        if categories.insert(id, name).is_some() {
            return Err(at(InvariantViolation::DuplicateCategoryId(id), offset));
        }
    }

    let n_grids = r.u32()?;
    // each grid header is at least 30 bytes; do not trust n_grids for capacity
    let mut grids = Vec::with_capacity((n_grids as usize).min(r.remaining() / 30));
    let mut seen = HashSet::new();
    for _ in 0..n_grids {
        let offset = r.offset();
        let image_id = read_str(&mut r)?;
        let category_id = r.u32()?;
        let height = r.u32()?;
        let width = r.u32()?;
        let channels = r.u32()?;
        let rf_offset = r.i32()?;
        let rf_stride = r.u32()?;
        let rf_size = r.u32()?;
        if height == 0 || width == 0 || channels == 0 {
            return Err(at(InvariantViolation::ZeroDimension { image_id }, offset));
        }
        let count = (height as usize)
            .checked_mul(width as usize)
            .and_then(|n| n.checked_mul(channels as usize))
            .ok_or(StoreError::Truncated { offset: r.offset() })?;
        let data_offset = r.offset();
        let data = r.f32_vec(count)?;
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(StoreError::NonFinite {
                image_id,
                offset: data_offset + 4 * i as u64,
            });
        }
        if !seen.insert(image_id.clone()) {
            return Err(StoreError::DuplicateImageId { image_id, offset });
        }
        let grid = FeatureGrid {
            image_id,
            category_id,
            height,
            width,
            channels,
            data,
            rf_stride,
            rf_size,
            rf_offset,
        };
        check_grid(&grid, &categories).map_err(|v| at(v, offset))?;
        grids.push(grid);
    }
    if r.remaining() > 0 {
        return Err(StoreError::TrailingBytes {
            offset: r.offset(),
            count: r.remaining(),
        });
    }
    Ok(FeatureStore {
        layer_name,
        categories,
        grids,
    })
}

/// Where a pooled vector came from, kept for patch visualization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VectorSource {
    pub grid: usize,
    pub row: u32,
    pub col: u32,
}

/// Unit-normalized feature vectors pooled across grids.
#[derive(Clone, Debug)]
pub struct PooledVectors {
    pub vectors: VectorSet,
    pub sources: Vec<VectorSource>,
    /// Positions dropped because their norm was below [`MIN_FEATURE_NORM`].
    pub excluded: usize,
}

/// Pools the L2-normalized feature vectors of every grid accepted by
/// `image_filter`. Near-zero vectors are skipped and counted.
pub fn collect_vectors<F>(store: &FeatureStore, image_filter: F) -> Result<PooledVectors, StoreError>
where
    F: Fn(&str) -> bool,
{
    let selected = store
        .grids
        .iter()
        .enumerate()
        .filter(|(_, g)| image_filter(&g.image_id));
    collect_from(selected)
}

/// Same as [`collect_vectors`] for an explicit list of grid indices.
pub fn collect_vectors_at(store: &FeatureStore, indices: &[usize]) -> Result<PooledVectors, StoreError> {
    collect_from(indices.iter().map(|&i| (i, &store.grids[i])))
}

fn collect_from<'a, I>(grids: I) -> Result<PooledVectors, StoreError>
where
    I: Iterator<Item = (usize, &'a FeatureGrid)>,
{
    let mut dim: Option<u32> = None;
    let mut data = Vec::new();
    let mut sources = Vec::new();
    let mut excluded = 0;
    for (gi, g) in grids {
        match dim {
            None => dim = Some(g.channels),
            Some(c) if c != g.channels => {
                return Err(StoreError::MixedChannels {
                    first: c,
                    other: g.channels,
                })
            }
            Some(_) => {}
        }
        for row in 0..g.height {
            for col in 0..g.width {
                let f = g.feature(row as usize, col as usize);
                let n = f.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
                if n < MIN_FEATURE_NORM {
                    excluded += 1;
                    continue;
                }
                data.extend(f.iter().map(|&x| f64::from(x) / n));
                sources.push(VectorSource { grid: gi, row, col });
            }
        }
    }
    Ok(PooledVectors {
        vectors: VectorSet::new(dim.unwrap_or(0) as usize, data),
        sources,
        excluded,
    })
}
