//! Deterministic synthetic scenes with exact geometry.
//!
//! Cameras sit on a ring around the origin, each looking at it; points are
//! drawn from the cube `[-extent, extent]^3` and observed by exact
//! projection, so [`crate::geometry::project`] reproduces every stored
//! observation up to floating-point rounding (unless pixel jitter is enabled).

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Point2, Point3, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{depth, project};
use crate::patch::image::RawImage;
use crate::scene::{
    CameraIntrinsics, ImageId, ImageView, PointId, SceneBuilder, SceneModel,
};

/// Sightings needed before a point becomes a track (capped by the camera count).
const MIN_TRACK_LEN: usize = 2;
const MAX_DRAWS_PER_POINT: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("point {0} could not be placed in view of enough cameras")]
    Unobservable(PointId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_points: usize,
    pub n_cameras: usize,
    /// Distance of every camera center from the origin.
    pub radius: f64,
    /// Half side of the point cube.
    pub extent: f64,
    /// Focal lengths are drawn uniformly from this range, one per camera.
    pub focal_range: (f64, f64),
    pub width: u32,
    pub height: u32,
    /// Cameras leave the equator by up to this many degrees.
    pub elevation_jitter_deg: f64,
    /// Probability that a camera observes a visible point.
    pub observe_prob: f64,
    /// Standard deviation of Gaussian noise added to observed pixels.
    pub jitter_px: f64,
    /// World-space feature size range; keypoint scale is `size * f / depth`.
    pub feature_size: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_points: 50,
            n_cameras: 8,
            radius: 4.0,
            extent: 1.0,
            focal_range: (200.0, 300.0),
            width: 640,
            height: 480,
            elevation_jitter_deg: 0.0,
            observe_prob: 1.0,
            jitter_px: 0.0,
            feature_size: (0.02, 0.1),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.n_points == 0 || self.n_cameras == 0 {
            return bad("counts must be positive");
        }
        if !(self.extent > 0.0) || !(self.radius > self.extent * 3f64.sqrt()) {
            return bad("radius must exceed the scene extent");
        }
        let (f0, f1) = self.focal_range;
        if !(f0 > 0.0 && f0 <= f1 && f1.is_finite()) {
            return bad("focal range must be positive and ordered");
        }
        let (s0, s1) = self.feature_size;
        if !(s0 > 0.0 && s0 <= s1 && s1.is_finite()) {
            return bad("feature size range must be positive and ordered");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive");
        }
        if !(0.0..80.0).contains(&self.elevation_jitter_deg.abs()) {
            return bad("elevation jitter must stay below 80 degrees");
        }
        if !(self.observe_prob > 0.0 && self.observe_prob <= 1.0) {
            return bad("observe probability must lie in (0, 1]");
        }
        if !(self.jitter_px >= 0.0 && self.jitter_px.is_finite()) {
            return bad("pixel jitter must be non-negative");
        }
        Ok(())
    }
}

/// World-to-camera rotation for a camera at `center` looking at the origin.
/// Rows are the camera axes in world coordinates: `x`, `y = z × x`, `z`.
pub fn look_at_origin(center: &Point3<f64>) -> UnitQuaternion<f64> {
    let z = (-center.coords).normalize();
    let x = z.cross(&Vector3::z()).normalize();
    let y = z.cross(&x);
    let m = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Image `k` has id `k + 1`, camera id `k + 1` and name `img_{k+1:04}.ppm`;
/// points have ids `1..=n_points`.
pub fn generate_scene(cfg: &SynthConfig) -> Result<SceneModel, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut builder = SceneBuilder::new();
    let mut views: Vec<(ImageView, CameraIntrinsics)> = Vec::with_capacity(cfg.n_cameras);
    let pp = Point2::new(cfg.width as f64 / 2.0, cfg.height as f64 / 2.0);
    for k in 0..cfg.n_cameras {
        let id = (k + 1) as ImageId;
        let azimuth = TAU * k as f64 / cfg.n_cameras as f64;
        let elevation = if cfg.elevation_jitter_deg > 0.0 {
            rng.random_range(-cfg.elevation_jitter_deg..=cfg.elevation_jitter_deg).to_radians()
        } else {
            0.0
        };
        let center = Point3::new(
            cfg.radius * azimuth.cos() * elevation.cos(),
            cfg.radius * azimuth.sin() * elevation.cos(),
            cfg.radius * elevation.sin(),
        );
        let focal = uniform(&mut rng, cfg.focal_range);
        let cam = CameraIntrinsics::simple_pinhole(id, focal, pp, cfg.width, cfg.height);
        let view = ImageView::from_center(id, id, look_at_origin(&center), center, format!("img_{id:04}.ppm"));
        builder.camera(cam.clone()).view(view.clone());
        views.push((view, cam));
    }

    let noise = Normal::new(0.0, cfg.jitter_px.max(f64::MIN_POSITIVE)).expect("finite std");
    let needed = MIN_TRACK_LEN.min(cfg.n_cameras);
    let e = cfg.extent;
    for p in 0..cfg.n_points {
        let point_id = (p + 1) as PointId;
        let mut placed = false;
        for _ in 0..MAX_DRAWS_PER_POINT {
            let position = Point3::new(
                rng.random_range(-e..=e),
                rng.random_range(-e..=e),
                rng.random_range(-e..=e),
            );
            let size = uniform(&mut rng, cfg.feature_size);
            let mut sightings = Vec::new();
            for (view, cam) in &views {
                let observed = rng.random_bool(cfg.observe_prob);
                let orientation = rng.random_range(0.0..TAU);
                let (dx, dy) = if cfg.jitter_px > 0.0 {
                    (noise.sample(&mut rng), noise.sample(&mut rng))
                } else {
                    (0.0, 0.0)
                };
                if !observed {
                    continue;
                }
                let Ok(xy) = project(&position, view, cam) else {
                    continue;
                };
                let xy = Point2::new(xy.x + dx, xy.y + dy);
                if !cam.contains(&xy) {
                    continue;
                }
                let scale = size * cam.focal_px() / depth(&position, view);
                sightings.push((view.image_id, xy, scale, orientation));
            }
            if sightings.len() >= needed {
                builder.track(point_id, position, &sightings);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SynthError::Unobservable(point_id));
        }
    }
    let mut scene = builder.build_unchecked();
    for track in scene.tracks.values_mut() {
        let c = track.point_id;
        track.color = [(40 + c * 53 % 200) as u8, (40 + c * 97 % 200) as u8, (40 + c * 151 % 200) as u8];
    }
    debug_assert!(scene.validate().is_ok());
    Ok(scene)
}

/// Renders a textured RGB image for `image_id`: a smooth background with one
/// oriented, colored bar per keypoint, painted far to near so closer points
/// occlude farther ones. The bar runs along the keypoint orientation.
pub fn render_view(scene: &SceneModel, image_id: ImageId) -> Option<RawImage> {
    let view = scene.view(image_id)?;
    let cam = scene.camera_of(view);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut img = RawImage::filled(w, h, 3, 0);
    for y in 0..h {
        for x in 0..w {
            let v = 96.0
                + 40.0 * ((x as f64) * 0.05 + image_id as f64).sin()
                + 40.0 * ((y as f64) * 0.07).cos();
            let v = v.clamp(0.0, 255.0) as u8;
            for c in 0..3 {
                img.put(x, y, c, v);
            }
        }
    }
    let mut order: Vec<(f64, usize)> = view
        .keypoints
        .iter()
        .enumerate()
        .map(|(k, kp)| {
            let d = kp
                .point_id
                .and_then(|id| scene.tracks.get(&id))
                .map_or(f64::INFINITY, |t| depth(&t.position, view));
            (d, k)
        })
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for kp in order.iter().map(|&(_, k)| &view.keypoints[k]) {
        let color = kp
            .point_id
            .and_then(|id| scene.tracks.get(&id))
            .map_or([255, 255, 255], |t| t.color);
        let half_len = 2.0 * kp.scale;
        let half_wid = 0.6 * kp.scale;
        let (s, c) = kp.orientation_rad.sin_cos();
        let r = half_len.ceil() as i64 + 1;
        let (cx, cy) = (kp.xy.x, kp.xy.y);
        for py in (cy.floor() as i64 - r)..=(cy.floor() as i64 + r) {
            for px in (cx.floor() as i64 - r)..=(cx.floor() as i64 + r) {
                if px < 0 || py < 0 || px >= w as i64 || py >= h as i64 {
                    continue;
                }
                let dx = px as f64 + 0.5 - cx;
                let dy = py as f64 + 0.5 - cy;
                let along = c * dx + s * dy;
                let across = -s * dx + c * dy;
                if along.abs() <= half_len && across.abs() <= half_wid {
                    for (ch, &v) in color.iter().enumerate() {
                        img.put(px as usize, py as usize, ch, v);
                    }
                }
            }
        }
    }
    Some(img)
}
