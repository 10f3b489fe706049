//! Scale- and rotation-normalized patch extraction.
//!
//! A patch is cut around a keypoint with side `12 * scale` pixels, clamped to
//! `[20, 128]`, rotated so the keypoint orientation maps to the patch x axis,
//! and resampled to 48x48 RGB. Coordinates follow the COLMAP convention: the
//! center of pixel `(i, j)` sits at `(i + 0.5, j + 0.5)`.

mod augment;
pub mod dataset;
pub mod image;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use augment::{augment, augment_with, AugmentParams};
pub use image::{decode_pnm, encode_pnm, rgb_to_gray, ImageError, RawImage};

use crate::scene::{ImageId, Observation, PointId};

pub const PATCH_SIDE: usize = 48;
pub const CROP_SIDE: usize = 32;
pub const PATCH_CHANNELS: usize = 3;
pub const PATCH_BYTES: usize = PATCH_SIDE * PATCH_SIDE * PATCH_CHANNELS;
pub const MIN_CROP_PX: f64 = 20.0;
pub const MAX_CROP_PX: f64 = 128.0;
pub const CROP_PER_SCALE: f64 = 12.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatchError {
    #[error("expected a {expected}-byte patch, got {actual} bytes")]
    WrongSize { expected: usize, actual: usize },
}

/// How the keypoint orientation is applied when normalizing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationConvention {
    /// Rotate by `-r`: a structure pointing along `r` ends up along +x.
    #[default]
    UndoOrientation,
    /// Rotate by `+r`.
    ApplyOrientation,
}

/// A normalized 48x48 RGB patch and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub pixels: Vec<u8>,
    pub image_id: ImageId,
    pub track_id: PointId,
    pub center_xy: [f64; 2],
    pub scale: f64,
    pub rotation_rad: f64,
    /// Side of the source-image window before resampling.
    pub crop_side_px: f64,
}

/// Source window side for a keypoint scale.
pub fn crop_side(scale: f64) -> f64 {
    (CROP_PER_SCALE * scale).clamp(MIN_CROP_PX, MAX_CROP_PX)
}

pub fn extract_patch(image: &RawImage, obs: &Observation, track_id: PointId) -> PatchRecord {
    extract_patch_with(image, obs, track_id, RotationConvention::default())
}

pub fn extract_patch_with(
    image: &RawImage,
    obs: &Observation,
    track_id: PointId,
    convention: RotationConvention,
) -> PatchRecord {
    let side = crop_side(obs.scale);
    let step = side / PATCH_SIDE as f64;
    let theta = match convention {
        RotationConvention::UndoOrientation => obs.orientation_rad,
        RotationConvention::ApplyOrientation => -obs.orientation_rad,
    }
    .rem_euclid(std::f64::consts::TAU);
    let (sin, cos) = theta.sin_cos();
    let half = PATCH_SIDE as f64 / 2.0;
    let mut pixels = vec![0u8; PATCH_BYTES];
    for v in 0..PATCH_SIDE {
        let oy = (v as f64 + 0.5 - half) * step;
        for u in 0..PATCH_SIDE {
            let ox = (u as f64 + 0.5 - half) * step;
            // Continuous image coordinates, then pixel-index space.
            let x = obs.xy.x + cos * ox - sin * oy - 0.5;
            let y = obs.xy.y + sin * ox + cos * oy - 0.5;
            let out = &mut pixels[(v * PATCH_SIDE + u) * PATCH_CHANNELS..][..PATCH_CHANNELS];
            if image.channels() == 1 {
                let g = quantize(image.sample_bilinear(x, y, 0));
                out.fill(g);
            } else {
                for (c, o) in out.iter_mut().enumerate() {
                    *o = quantize(image.sample_bilinear(x, y, c));
                }
            }
        }
    }
    PatchRecord {
        pixels,
        image_id: obs.image_id,
        track_id,
        center_xy: [obs.xy.x, obs.xy.y],
        scale: obs.scale,
        rotation_rad: obs.orientation_rad,
        crop_side_px: side,
    }
}

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Central 32x32 window (rows and columns 8..=39) of a 48x48 RGB patch.
pub fn center_crop_32(pixels: &[u8]) -> Result<Vec<u8>, PatchError> {
    if pixels.len() != PATCH_BYTES {
        return Err(PatchError::WrongSize {
            expected: PATCH_BYTES,
            actual: pixels.len(),
        });
    }
    let off = (PATCH_SIDE - CROP_SIDE) / 2;
    let row_bytes = CROP_SIDE * PATCH_CHANNELS;
    let mut out = Vec::with_capacity(CROP_SIDE * row_bytes);
    for r in off..off + CROP_SIDE {
        let start = (r * PATCH_SIDE + off) * PATCH_CHANNELS;
        out.extend_from_slice(&pixels[start..start + row_bytes]);
    }
    Ok(out)
}
