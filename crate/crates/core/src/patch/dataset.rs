//! Binary patch file (`PSDS`) and the JSON manifest written next to it.
//!
//! Layout, little-endian:
//!
//! ```text
//! "PSDS" | version u16 | count u64 | count x record
//! record = track_id u64 | image_id u32 | center_x f32 | center_y f32
//!        | scale f32 | rotation f32 | crop_side f32 | 48*48*3 u8
//! ```

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PatchRecord, RotationConvention, PATCH_BYTES};
use crate::sampler::{SamplingThresholds, ScaleClamp};

pub const PATCH_MAGIC: &[u8; 4] = b"PSDS";
pub const PATCH_FORMAT_VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 4 + 2 + 8;
pub const RECORD_BYTES: usize = 8 + 4 + 4 * 5 + PATCH_BYTES;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("bad magic: not a patch file")]
    BadMagic,
    #[error("unsupported patch file version {0}")]
    UnsupportedVersion(u16),
    #[error("patch file declares {declared} records but holds {actual} bytes of record data")]
    LengthMismatch { declared: u64, actual: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_patch_file<W: Write>(mut w: W, records: &[PatchRecord]) -> io::Result<()> {
    w.write_all(PATCH_MAGIC)?;
    w.write_u16::<LittleEndian>(PATCH_FORMAT_VERSION)?;
    w.write_u64::<LittleEndian>(records.len() as u64)?;
    for r in records {
        assert_eq!(r.pixels.len(), PATCH_BYTES, "patch records are 48x48 RGB");
        w.write_u64::<LittleEndian>(r.track_id)?;
        w.write_u32::<LittleEndian>(r.image_id)?;
        w.write_f32::<LittleEndian>(r.center_xy[0] as f32)?;
        w.write_f32::<LittleEndian>(r.center_xy[1] as f32)?;
        w.write_f32::<LittleEndian>(r.scale as f32)?;
        w.write_f32::<LittleEndian>(r.rotation_rad as f32)?;
        w.write_f32::<LittleEndian>(r.crop_side_px as f32)?;
        w.write_all(&r.pixels)?;
    }
    Ok(())
}

pub fn encode_patch_file(records: &[PatchRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + records.len() * RECORD_BYTES);
    write_patch_file(&mut out, records).expect("writing to a Vec cannot fail");
    out
}

/// Validates the header and returns the record count.
pub fn read_patch_header(bytes: &[u8]) -> Result<u64, DatasetError> {
    let mut cur = bytes;
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|_| DatasetError::BadMagic)?;
    if &magic != PATCH_MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let version = cur.read_u16::<LittleEndian>()?;
    if version != PATCH_FORMAT_VERSION {
        return Err(DatasetError::UnsupportedVersion(version));
    }
    let count = cur.read_u64::<LittleEndian>()?;
    let body = bytes.len() - HEADER_BYTES;
    if (count as u128) * (RECORD_BYTES as u128) != body as u128 {
        return Err(DatasetError::LengthMismatch {
            declared: count,
            actual: body,
        });
    }
    Ok(count)
}

pub fn decode_patch_file(bytes: &[u8]) -> Result<Vec<PatchRecord>, DatasetError> {
    let count = read_patch_header(bytes)? as usize;
    let mut cur = &bytes[HEADER_BYTES..];
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let track_id = cur.read_u64::<LittleEndian>()?;
        let image_id = cur.read_u32::<LittleEndian>()?;
        let cx = cur.read_f32::<LittleEndian>()? as f64;
        let cy = cur.read_f32::<LittleEndian>()? as f64;
        let scale = cur.read_f32::<LittleEndian>()? as f64;
        let rotation_rad = cur.read_f32::<LittleEndian>()? as f64;
        let crop_side_px = cur.read_f32::<LittleEndian>()? as f64;
        let mut pixels = vec![0u8; PATCH_BYTES];
        cur.read_exact(&mut pixels)?;
        records.push(PatchRecord {
            pixels,
            image_id,
            track_id,
            center_xy: [cx, cy],
            scale,
            rotation_rad,
            crop_side_px,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub views: usize,
    pub tracks: usize,
    pub observations: usize,
    pub patches: usize,
    pub pairs: usize,
    pub tracks_with_pairs: usize,
    pub dropped_behind_camera: usize,
    pub dropped_scale: usize,
}

/// Run description written as `manifest.json` beside the dataset files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u16,
    pub scene_name: String,
    pub thresholds: SamplingThresholds,
    pub scale_clamp: ScaleClamp,
    pub rotation_convention: RotationConvention,
    pub config_hash: String,
    pub counts: ManifestCounts,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
