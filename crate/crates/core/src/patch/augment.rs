//! Train-time augmentation: random rotation and zoom about the patch center,
//! followed by the central 32x32 crop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{quantize, PatchError, PatchRecord, RawImage, CROP_SIDE, PATCH_BYTES, PATCH_CHANNELS, PATCH_SIDE};

pub const MAX_ROTATION_DEG: f64 = 22.5;
pub const MIN_ZOOM: f64 = 1.0;
pub const MAX_ZOOM: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub rotation_deg: f64,
    pub scale: f64,
}

impl AugmentParams {
    pub const IDENTITY: Self = Self {
        rotation_deg: 0.0,
        scale: 1.0,
    };

    /// Rotation uniform in `[-22.5, 22.5]` degrees, zoom uniform in `[1.0, 1.1]`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            rotation_deg: rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
            scale: rng.random_range(MIN_ZOOM..=MAX_ZOOM),
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

pub fn augment(patch: &PatchRecord, seed: u64) -> Vec<u8> {
    augment_with(&patch.pixels, AugmentParams::from_seed(seed)).expect("patch records are 48x48 RGB")
}

/// Applies the given rotation and zoom to a 48x48 RGB patch and returns the
/// central 32x32 window.
pub fn augment_with(pixels: &[u8], params: AugmentParams) -> Result<Vec<u8>, PatchError> {
    if pixels.len() != PATCH_BYTES {
        return Err(PatchError::WrongSize {
            expected: PATCH_BYTES,
            actual: pixels.len(),
        });
    }
    let src = RawImage::new(PATCH_SIDE, PATCH_SIDE, PATCH_CHANNELS, pixels.to_vec())
        .expect("size checked above");
    let (sin, cos) = params.rotation_deg.to_radians().sin_cos();
    let inv = 1.0 / params.scale;
    let center = PATCH_SIDE as f64 / 2.0;
    let half_crop = CROP_SIDE as f64 / 2.0;
    let mut out = vec![0u8; CROP_SIDE * CROP_SIDE * PATCH_CHANNELS];
    for v in 0..CROP_SIDE {
        let oy = v as f64 + 0.5 - half_crop;
        for u in 0..CROP_SIDE {
            let ox = u as f64 + 0.5 - half_crop;
            let x = center + (cos * ox - sin * oy) * inv - 0.5;
            let y = center + (sin * ox + cos * oy) * inv - 0.5;
            for c in 0..PATCH_CHANNELS {
                out[(v * CROP_SIDE + u) * PATCH_CHANNELS + c] = quantize(src.sample_bilinear(x, y, c));
            }
        }
    }
    Ok(out)
}
