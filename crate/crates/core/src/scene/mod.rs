//! Sparse structure-from-motion scenes: cameras, posed views and 3D tracks.
//!
//! A [`SceneModel`] is immutable once validated. Views and tracks are kept in
//! ordered maps so that every traversal is deterministic, and the observations
//! of a track keep the order they had in the source file. Patch indices used by
//! the sampler and the dataset files refer to that order.

mod colmap;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Point2, Point3, UnitQuaternion, Vector3};
use thiserror::Error;

pub use colmap::{parse_scene, read_scene_dir, write_scene, write_scene_dir, SceneText};

pub type CameraId = u32;
pub type ImageId = u32;
pub type PointId = u64;

/// Which of the three COLMAP text files an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneFile {
    Cameras,
    Images,
    Points,
}

impl std::fmt::Display for SceneFile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SceneFile::Cameras => "cameras.txt",
            SceneFile::Images => "images.txt",
            SceneFile::Points => "points3D.txt",
        })
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{file}:{line}: {message}")]
    Parse {
        file: SceneFile,
        line: usize,
        message: String,
    },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Supported intrinsic models. Both are distortion-free pinholes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraModel {
    SimplePinhole,
    Pinhole,
}

impl CameraModel {
    pub fn colmap_name(self) -> &'static str {
        match self {
            CameraModel::SimplePinhole => "SIMPLE_PINHOLE",
            CameraModel::Pinhole => "PINHOLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    pub camera_id: CameraId,
    pub model: CameraModel,
    pub fx: f64,
    pub fy: f64,
    pub principal_point: Point2<f64>,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn simple_pinhole(
        camera_id: CameraId,
        focal: f64,
        principal_point: Point2<f64>,
        width: u32,
        height: u32,
    ) -> Self {
        Self {
            camera_id,
            model: CameraModel::SimplePinhole,
            fx: focal,
            fy: focal,
            principal_point,
            width,
            height,
        }
    }

    /// Single focal length used for scale reasoning. For `PINHOLE` cameras this
    /// is the mean of `fx` and `fy`.
    pub fn focal_px(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }

    pub fn contains(&self, xy: &Point2<f64>) -> bool {
        xy.x >= 0.0 && xy.y >= 0.0 && xy.x <= self.width as f64 && xy.y <= self.height as f64
    }

    fn validate(&self) -> Result<(), SceneError> {
        let id = self.camera_id;
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(SceneError::Integrity(format!(
                "camera {id}: focal length must be positive"
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::Integrity(format!(
                "camera {id}: image size must be positive"
            )));
        }
        if !self.contains(&self.principal_point) {
            return Err(SceneError::Integrity(format!(
                "camera {id}: principal point outside the image"
            )));
        }
        Ok(())
    }
}

/// A 2D feature in one image, with the point it triangulates (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub xy: Point2<f64>,
    pub scale: f64,
    pub orientation_rad: f64,
    pub point_id: Option<PointId>,
}

/// A registered image: pose, intrinsics reference and its keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageView {
    pub image_id: ImageId,
    pub camera_id: CameraId,
    /// World-to-camera rotation.
    pub orientation: UnitQuaternion<f64>,
    /// World-to-camera translation (`x_cam = R x_world + t`).
    pub translation: Vector3<f64>,
    pub name: String,
    pub keypoints: Vec<Keypoint>,
}

impl ImageView {
    pub fn new(
        image_id: ImageId,
        camera_id: CameraId,
        orientation: UnitQuaternion<f64>,
        translation: Vector3<f64>,
        name: impl Into<String>,
    ) -> Self {
        Self {
            image_id,
            camera_id,
            orientation,
            translation,
            name: name.into(),
            keypoints: Vec::new(),
        }
    }

    /// Builds a view from a camera center and a world-to-camera rotation.
    pub fn from_center(
        image_id: ImageId,
        camera_id: CameraId,
        orientation: UnitQuaternion<f64>,
        center: Point3<f64>,
        name: impl Into<String>,
    ) -> Self {
        let translation = -(orientation * center.coords);
        Self::new(image_id, camera_id, orientation, translation, name)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix().into_inner()
    }

    /// Camera center `c` in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.orientation.inverse() * self.translation))
    }

    /// Optical axis (camera +z) in world coordinates, unit length.
    pub fn viewing_direction(&self) -> Vector3<f64> {
        let r = self.rotation();
        r.row(2).transpose().normalize()
    }

    /// Maps a world point into the camera frame.
    pub fn to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.orientation * p.coords + self.translation
    }
}

/// A track's sighting in one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub image_id: ImageId,
    /// Index of the keypoint inside the view's keypoint list.
    pub keypoint_idx: usize,
    pub xy: Point2<f64>,
    pub scale: f64,
    pub orientation_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub point_id: PointId,
    pub position: Point3<f64>,
    pub color: [u8; 3],
    pub error: f64,
    pub observations: Vec<Observation>,
}

impl Track {
    pub fn image_ids(&self) -> impl Iterator<Item = ImageId> + '_ {
        self.observations.iter().map(|o| o.image_id)
    }

    pub fn observation_in(&self, image_id: ImageId) -> Option<&Observation> {
        self.observations.iter().find(|o| o.image_id == image_id)
    }
}

/// Images observed by both tracks.
pub fn common_images(track_a: &Track, track_b: &Track) -> BTreeSet<ImageId> {
    let a: BTreeSet<ImageId> = track_a.image_ids().collect();
    track_b.image_ids().filter(|id| a.contains(id)).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneModel {
    pub cameras: BTreeMap<CameraId, CameraIntrinsics>,
    pub views: BTreeMap<ImageId, ImageView>,
    pub tracks: BTreeMap<PointId, Track>,
}

impl SceneModel {
    pub fn camera_of(&self, view: &ImageView) -> &CameraIntrinsics {
        &self.cameras[&view.camera_id]
    }

    pub fn view(&self, image_id: ImageId) -> Option<&ImageView> {
        self.views.get(&image_id)
    }

    pub fn observation_count(&self) -> usize {
        self.tracks.values().map(|t| t.observations.len()).sum()
    }

    /// Checks every cross reference and per-type invariant.
    pub fn validate(&self) -> Result<(), SceneError> {
        for (&id, cam) in &self.cameras {
            if id != cam.camera_id {
                return Err(SceneError::Integrity(format!(
                    "camera keyed {id} carries id {}",
                    cam.camera_id
                )));
            }
            cam.validate()?;
        }
        for (&id, view) in &self.views {
            if id != view.image_id {
                return Err(SceneError::Integrity(format!(
                    "image keyed {id} carries id {}",
                    view.image_id
                )));
            }
            let cam = self.cameras.get(&view.camera_id).ok_or_else(|| {
                SceneError::Integrity(format!(
                    "image {id} references missing camera {}",
                    view.camera_id
                ))
            })?;
            if !view.translation.iter().all(|v| v.is_finite())
                || !view.orientation.coords.iter().all(|v| v.is_finite())
            {
                return Err(SceneError::Integrity(format!("image {id}: non-finite pose")));
            }
            for (k, kp) in view.keypoints.iter().enumerate() {
                if !cam.contains(&kp.xy) {
                    return Err(SceneError::Integrity(format!(
                        "image {id}: keypoint {k} outside the image"
                    )));
                }
                if !(kp.scale > 0.0) || !kp.scale.is_finite() || !kp.orientation_rad.is_finite() {
                    return Err(SceneError::Integrity(format!(
                        "image {id}: keypoint {k} has invalid scale or orientation"
                    )));
                }
                if let Some(pid) = kp.point_id {
                    let track = self.tracks.get(&pid).ok_or_else(|| {
                        SceneError::Integrity(format!(
                            "image {id}: keypoint {k} references missing point {pid}"
                        ))
                    })?;
                    if !track.observations.iter().any(|o| o.image_id == id && o.keypoint_idx == k) {
                        return Err(SceneError::Integrity(format!(
                            "image {id}: keypoint {k} claims point {pid}, which does not observe it"
                        )));
                    }
                }
            }
        }
        for (&id, track) in &self.tracks {
            if id != track.point_id {
                return Err(SceneError::Integrity(format!(
                    "point keyed {id} carries id {}",
                    track.point_id
                )));
            }
            if !track.position.coords.iter().all(|v| v.is_finite()) || !track.error.is_finite() {
                return Err(SceneError::Integrity(format!("point {id}: non-finite values")));
            }
            if track.observations.is_empty() {
                return Err(SceneError::Integrity(format!("point {id}: empty track")));
            }
            let mut seen = BTreeSet::new();
            for obs in &track.observations {
                if !seen.insert(obs.image_id) {
                    return Err(SceneError::Integrity(format!(
                        "point {id}: observed twice in image {}",
                        obs.image_id
                    )));
                }
                let view = self.views.get(&obs.image_id).ok_or_else(|| {
                    SceneError::Integrity(format!(
                        "point {id} references missing image {}",
                        obs.image_id
                    ))
                })?;
                let kp = view.keypoints.get(obs.keypoint_idx).ok_or_else(|| {
                    SceneError::Integrity(format!(
                        "point {id} references missing keypoint {} of image {}",
                        obs.keypoint_idx, obs.image_id
                    ))
                })?;
                if kp.point_id != Some(id) {
                    return Err(SceneError::Integrity(format!(
                        "point {id}: keypoint {} of image {} belongs to another point",
                        obs.keypoint_idx, obs.image_id
                    )));
                }
                if kp.xy != obs.xy || kp.scale != obs.scale || kp.orientation_rad != obs.orientation_rad
                {
                    return Err(SceneError::Integrity(format!(
                        "point {id}: observation in image {} disagrees with its keypoint",
                        obs.image_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Incremental construction of a consistent scene: add cameras and views, then
/// tracks whose observations are appended to the views' keypoint lists.
#[derive(Debug, Default)]
pub struct SceneBuilder {
    scene: SceneModel,
}

impl SceneBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn camera(&mut self, camera: CameraIntrinsics) -> &mut Self {
        self.scene.cameras.insert(camera.camera_id, camera);
        self
    }

    pub fn view(&mut self, view: ImageView) -> &mut Self {
        self.scene.views.insert(view.image_id, view);
        self
    }

    /// Adds a track. Each sighting is `(image_id, xy, scale, orientation)`;
    /// sightings in unknown images are reported by [`SceneBuilder::build`].
    pub fn track(
        &mut self,
        point_id: PointId,
        position: Point3<f64>,
        sightings: &[(ImageId, Point2<f64>, f64, f64)],
    ) -> &mut Self {
        let mut observations = Vec::with_capacity(sightings.len());
        for &(image_id, xy, scale, orientation_rad) in sightings {
            let keypoint_idx = match self.scene.views.get_mut(&image_id) {
                Some(view) => {
                    view.keypoints.push(Keypoint {
                        xy,
                        scale,
                        orientation_rad,
                        point_id: Some(point_id),
                    });
                    view.keypoints.len() - 1
                }
                None => usize::MAX,
            };
            observations.push(Observation {
                image_id,
                keypoint_idx,
                xy,
                scale,
                orientation_rad,
            });
        }
        self.scene.tracks.insert(
            point_id,
            Track {
                point_id,
                position,
                color: [128, 128, 128],
                error: 0.0,
                observations,
            },
        );
        self
    }

    pub fn build(self) -> Result<SceneModel, SceneError> {
        self.scene.validate()?;
        Ok(self.scene)
    }

    /// Returns the scene without validating it.
    pub fn build_unchecked(self) -> SceneModel {
        self.scene
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(image_id: ImageId) -> Observation {
        Observation {
            image_id,
            keypoint_idx: 0,
            xy: Point2::new(1.0, 1.0),
            scale: 2.0,
            orientation_rad: 0.0,
        }
    }

    fn track(images: &[ImageId]) -> Track {
        Track {
            point_id: 1,
            position: Point3::origin(),
            color: [0; 3],
            error: 0.0,
            observations: images.iter().copied().map(obs).collect(),
        }
    }

    #[test]
    fn common_images_of_disjoint_tracks_is_empty() {
        assert!(common_images(&track(&[1, 2]), &track(&[3, 4])).is_empty());
    }

    #[test]
    fn common_images_of_identical_tracks_is_everything() {
        let t = track(&[5, 1, 9]);
        assert_eq!(common_images(&t, &t), BTreeSet::from([1, 5, 9]));
    }

    #[test]
    fn common_images_picks_shared_views() {
        let a = track(&[1, 3, 5, 7]);
        let b = track(&[2, 3, 7, 8]);
        assert_eq!(common_images(&a, &b), BTreeSet::from([3, 7]));
    }

    #[test]
    fn viewing_direction_is_third_rotation_row() {
        let q = UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1);
        let view = ImageView::new(1, 1, q, Vector3::new(1.0, 2.0, 3.0), "a");
        let expected = q.to_rotation_matrix().matrix().transpose() * Vector3::z();
        assert!((view.viewing_direction() - expected).norm() < 1e-12);
        assert!((view.viewing_direction().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn center_round_trips_through_translation() {
        let q = UnitQuaternion::from_euler_angles(0.1, 0.7, -0.4);
        let c = Point3::new(3.0, -1.0, 2.5);
        let view = ImageView::from_center(1, 1, q, c, "a");
        assert!((view.center() - c).norm() < 1e-12);
        assert!(view.to_camera(&c).norm() < 1e-12);
    }

    #[test]
    fn builder_rejects_sighting_in_unknown_view() {
        let mut b = SceneBuilder::new();
        b.camera(CameraIntrinsics::simple_pinhole(1, 100.0, Point2::new(50.0, 50.0), 100, 100));
        b.track(1, Point3::origin(), &[(4, Point2::new(1.0, 1.0), 2.0, 0.0)]);
        assert!(matches!(b.build(), Err(SceneError::Integrity(_))));
    }

    #[test]
    fn principal_point_outside_image_is_rejected() {
        let mut b = SceneBuilder::new();
        b.camera(CameraIntrinsics::simple_pinhole(1, 100.0, Point2::new(150.0, 50.0), 100, 100));
        assert!(matches!(b.build(), Err(SceneError::Integrity(_))));
    }
}
