//! Descriptor matrices and the binary descriptor (`PSDE`) and mask files.
//!
//! Descriptor file, little-endian: `"PSDE" | count u64 | dim u32 | count*dim f32`.
//! Row `k` belongs to row `k` of the patch (or keypoint) file it accompanies.
//!
//! Mask file, little-endian: `m u64`, then the `m` rows of the anchor-vs-positive
//! mask followed by the `m` rows of the positive-vs-anchor mask. Each row is
//! `ceil(m / 8)` bytes; column `j` is bit `j % 8` (LSB first) of byte `j / 8`.

use std::io::Read;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

pub const DESCRIPTOR_MAGIC: &[u8; 4] = b"PSDE";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DescriptorError {
    #[error("bad magic: not a descriptor file")]
    BadMagic,
    #[error("truncated header")]
    TruncatedHeader,
    #[error("descriptor file declares {count}x{dim} values but holds {actual} bytes")]
    LengthMismatch { count: u64, dim: u32, actual: usize },
    #[error("descriptor dimension must be positive")]
    ZeroDimension,
    #[error("mask file is malformed: {0}")]
    Mask(String),
    #[error("row {row} has {len} values, expected {dim}")]
    RaggedRow { row: usize, len: usize, dim: usize },
}

/// Dense row-major set of equal-length descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    dim: usize,
    data: Vec<f32>,
}

impl DescriptorSet {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self, DescriptorError> {
        if dim == 0 {
            return Err(DescriptorError::ZeroDimension);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(DescriptorError::RaggedRow {
                row: data.len() / dim,
                len: data.len() % dim,
                dim,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self, DescriptorError> {
        let dim = rows.first().map_or(1, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (row, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(DescriptorError::RaggedRow {
                    row,
                    len: r.len(),
                    dim,
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self {
            dim: self.dim,
            data,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        out.extend_from_slice(DESCRIPTOR_MAGIC);
        out.write_u64::<LittleEndian>(self.len() as u64).unwrap();
        out.write_u32::<LittleEndian>(self.dim as u32).unwrap();
        for &v in &self.data {
            out.write_f32::<LittleEndian>(v).unwrap();
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DescriptorError> {
        let mut cur = bytes;
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(|_| DescriptorError::BadMagic)?;
        if &magic != DESCRIPTOR_MAGIC {
            return Err(DescriptorError::BadMagic);
        }
        let count = cur
            .read_u64::<LittleEndian>()
            .map_err(|_| DescriptorError::TruncatedHeader)?;
        let dim = cur
            .read_u32::<LittleEndian>()
            .map_err(|_| DescriptorError::TruncatedHeader)?;
        if dim == 0 {
            return Err(DescriptorError::ZeroDimension);
        }
        if (count as u128) * (dim as u128) * 4 != cur.len() as u128 {
            return Err(DescriptorError::LengthMismatch {
                count,
                dim,
                actual: cur.len(),
            });
        }
        let data = cur
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(dim as usize, data)
    }
}

/// Euclidean distance accumulated in `f64`.
pub fn l2_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Pair of `m x m` boolean masks for batch-hard mining.
///
/// `anchor_vs_positive(i, j)`: positive `b_j` is a valid negative for anchor `a_i`.
/// `positive_vs_anchor(i, k)`: anchor `a_k` is a valid negative for positive `b_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    m: usize,
    anchor_vs_positive: Vec<bool>,
    positive_vs_anchor: Vec<bool>,
}

impl ValidityMask {
    pub fn new(
        m: usize,
        anchor_vs_positive: Vec<bool>,
        positive_vs_anchor: Vec<bool>,
    ) -> Result<Self, DescriptorError> {
        if anchor_vs_positive.len() != m * m || positive_vs_anchor.len() != m * m {
            return Err(DescriptorError::Mask(format!("masks must be {m}x{m}")));
        }
        if (0..m).any(|i| anchor_vs_positive[i * m + i] || positive_vs_anchor[i * m + i]) {
            return Err(DescriptorError::Mask("diagonal entries must be false".into()));
        }
        Ok(Self {
            m,
            anchor_vs_positive,
            positive_vs_anchor,
        })
    }

    /// Every off-diagonal entry set.
    pub fn full(m: usize) -> Self {
        let v: Vec<bool> = (0..m * m).map(|k| k / m != k % m).collect();
        Self::new(m, v.clone(), v).unwrap()
    }

    pub fn empty(m: usize) -> Self {
        Self::new(m, vec![false; m * m], vec![false; m * m]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    #[inline]
    pub fn anchor_vs_positive(&self, i: usize, j: usize) -> bool {
        self.anchor_vs_positive[i * self.m + j]
    }

    #[inline]
    pub fn positive_vs_anchor(&self, i: usize, k: usize) -> bool {
        self.positive_vs_anchor[i * self.m + k]
    }

    pub fn encode(&self) -> Vec<u8> {
        let row_bytes = self.m.div_ceil(8);
        let mut out = Vec::with_capacity(8 + 2 * self.m * row_bytes);
        out.write_u64::<LittleEndian>(self.m as u64).unwrap();
        for mask in [&self.anchor_vs_positive, &self.positive_vs_anchor] {
            for row in mask.chunks(self.m.max(1)).take(self.m) {
                let mut packed = vec![0u8; row_bytes];
                for (j, &bit) in row.iter().enumerate() {
                    if bit {
                        packed[j / 8] |= 1 << (j % 8);
                    }
                }
                out.extend_from_slice(&packed);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DescriptorError> {
        let mut cur = bytes;
        let m = cur
            .read_u64::<LittleEndian>()
            .map_err(|_| DescriptorError::Mask("missing size".into()))?;
        let row_bytes = m.div_ceil(8) as u128;
        if 2 * (m as u128) * row_bytes != cur.len() as u128 {
            return Err(DescriptorError::Mask(format!(
                "expected {} bytes of rows for m = {m}, got {}",
                2 * (m as u128) * row_bytes,
                cur.len()
            )));
        }
        let m = m as usize;
        let row_bytes = row_bytes as usize;
        let mut masks = [vec![false; m * m], vec![false; m * m]];
        for (which, mask) in masks.iter_mut().enumerate() {
            for i in 0..m {
                let row = &cur[(which * m + i) * row_bytes..][..row_bytes];
                for j in 0..m {
                    mask[i * m + j] = row[j / 8] >> (j % 8) & 1 == 1;
                }
                let pad = row_bytes * 8 - m;
                if pad > 0 && row[row_bytes - 1] >> (8 - pad) != 0 {
                    return Err(DescriptorError::Mask("padding bits must be zero".into()));
                }
            }
        }
        let [avp, pva] = masks;
        Self::new(m, avp, pva)
    }
}
