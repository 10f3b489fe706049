//! Wide-baseline point-transfer protocol on reconstructed multi-view scenes.
//!
//! Keypoints detected in a source image are carried to the other images
//! through the reconstructed 3D point whose source projection is nearest (and
//! within a small radius). Each image is then matched against an anchor image
//! on the keypoints visible in both, and pairs are grouped by baseline angle.

use std::collections::BTreeMap;

use nalgebra::Point2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hpatches::{matching_map, Keypoints};
use super::{CategoryResult, EvalError, EvalReport, PairResult};
use crate::descriptors::DescriptorSet;
use crate::geometry::{angle_between, depth, project};
use crate::scene::{ImageId, PointId, SceneModel};

pub const TRANSFER_RADIUS_PX: f64 = 3.0;
pub const DEFAULT_POINTS_PER_PAIR: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BaselineCategory {
    Narrow,
    Wide,
    VeryWide,
    /// Beyond 130 degrees; reported separately.
    OutOfRange,
}

impl BaselineCategory {
    pub const REGULAR: [BaselineCategory; 3] = [Self::Narrow, Self::Wide, Self::VeryWide];

    pub fn label(self) -> &'static str {
        match self {
            Self::Narrow => "Narrow",
            Self::Wide => "Wide",
            Self::VeryWide => "Very-Wide",
            Self::OutOfRange => "Out-of-range",
        }
    }
}

/// `[0, 30)` narrow, `[30, 75)` wide, `[75, 130]` very wide. Shared endpoints
/// belong to the wider category.
pub fn categorize_baseline(angle_deg: f64) -> BaselineCategory {
    if angle_deg < 30.0 {
        BaselineCategory::Narrow
    } else if angle_deg < 75.0 {
        BaselineCategory::Wide
    } else if angle_deg <= 130.0 {
        BaselineCategory::VeryWide
    } else {
        BaselineCategory::OutOfRange
    }
}

/// Projections of every 3D point in front of a reference view.
#[derive(Debug, Clone)]
pub struct PointTransfer<'a> {
    scene: &'a SceneModel,
    projections: Vec<(PointId, Point2<f64>)>,
}

impl<'a> PointTransfer<'a> {
    pub fn new(scene: &'a SceneModel, reference: ImageId) -> Option<Self> {
        let view = scene.view(reference)?;
        let cam = scene.camera_of(view);
        let projections = scene
            .tracks
            .values()
            .filter(|t| depth(&t.position, view) > 0.0)
            .filter_map(|t| project(&t.position, view, cam).ok().map(|p| (t.point_id, p)))
            .collect();
        Some(Self { scene, projections })
    }

    /// Point whose reference projection is nearest to `p_r`, if within `radius`.
    /// Ties go to the lowest point id.
    pub fn nearest(&self, p_r: &Point2<f64>, radius: f64) -> Option<PointId> {
        let mut best: Option<(PointId, f64)> = None;
        for &(id, p) in &self.projections {
            let d = (p - p_r).norm();
            if d <= radius && best.is_none_or(|(_, b)| d < b) {
                best = Some((id, d));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Projection of a point into `target`, if it lies in front of that camera.
    pub fn project_into(&self, point: PointId, target: ImageId) -> Option<Point2<f64>> {
        let view = self.scene.view(target)?;
        let track = self.scene.tracks.get(&point)?;
        project(&track.position, view, self.scene.camera_of(view)).ok()
    }

    pub fn transfer(&self, p_r: &Point2<f64>, target: ImageId, radius: f64) -> Option<Point2<f64>> {
        self.project_into(self.nearest(p_r, radius)?, target)
    }
}

pub fn transfer_point(
    p_r: &Point2<f64>,
    reference: ImageId,
    target: ImageId,
    scene: &SceneModel,
    radius: f64,
) -> Option<Point2<f64>> {
    PointTransfer::new(scene, reference)?.transfer(p_r, target, radius)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrechaConfig {
    /// Image the keypoints were detected in.
    pub keypoint_source: ImageId,
    /// Image every other image is paired with.
    pub anchor: ImageId,
    /// Images paired with the anchor; empty means every other view.
    pub targets: Vec<ImageId>,
    pub n_points: usize,
    pub seed: u64,
    pub radius: f64,
}

impl StrechaConfig {
    pub fn new(keypoint_source: ImageId, anchor: ImageId) -> Self {
        Self {
            keypoint_source,
            anchor,
            targets: Vec::new(),
            n_points: DEFAULT_POINTS_PER_PAIR,
            seed: 0,
            radius: TRANSFER_RADIUS_PX,
        }
    }
}

/// Nearest reconstructed point of each source keypoint.
pub fn keypoint_points(
    transfer: &PointTransfer<'_>,
    keypoints: &[Point2<f64>],
    radius: f64,
) -> Vec<Option<PointId>> {
    keypoints.iter().map(|p| transfer.nearest(p, radius)).collect()
}

/// Location of each source keypoint in `image`, when its point projects in
/// front of that camera and inside the image.
pub fn transferred_keypoints(
    transfer: &PointTransfer<'_>,
    points: &[Option<PointId>],
    image: ImageId,
) -> Vec<Option<Point2<f64>>> {
    let Some(view) = transfer.scene.view(image) else {
        return vec![None; points.len()];
    };
    let cam = transfer.scene.camera_of(view);
    points
        .iter()
        .map(|p| {
            p.and_then(|id| transfer.project_into(id, image))
                .filter(|q| cam.contains(q))
        })
        .collect()
}

/// Runs the protocol. `descriptors[image]` row `k` describes source keypoint
/// `k` as transferred into `image`.
pub fn strecha_protocol(
    scene: &SceneModel,
    keypoints: &[Point2<f64>],
    descriptors: &BTreeMap<ImageId, DescriptorSet>,
    cfg: &StrechaConfig,
) -> Result<EvalReport, EvalError> {
    let transfer = PointTransfer::new(scene, cfg.keypoint_source)
        .ok_or(EvalError::UnknownImage(cfg.keypoint_source))?;
    let anchor_view = scene.view(cfg.anchor).ok_or(EvalError::UnknownImage(cfg.anchor))?;
    let targets: Vec<ImageId> = if cfg.targets.is_empty() {
        scene.views.keys().copied().filter(|&id| id != cfg.anchor).collect()
    } else {
        cfg.targets.clone()
    };

    let desc_for = |image: ImageId| -> Result<&DescriptorSet, EvalError> {
        let d = descriptors
            .get(&image)
            .ok_or_else(|| EvalError::Alignment(format!("no descriptors for image {image}")))?;
        if d.len() != keypoints.len() {
            return Err(EvalError::Alignment(format!(
                "image {image}: {} descriptors for {} keypoints",
                d.len(),
                keypoints.len()
            )));
        }
        Ok(d)
    };

    let anchor_desc = desc_for(cfg.anchor)?;
    let points = keypoint_points(&transfer, keypoints, cfg.radius);
    let anchor_visible = transferred_keypoints(&transfer, &points, cfg.anchor);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = EvalReport::new("strecha");
    for &t in &targets {
        let view = scene.view(t).ok_or(EvalError::UnknownImage(t))?;
        let target_desc = desc_for(t)?;
        let visible = transferred_keypoints(&transfer, &points, t);
        let common: Vec<usize> = (0..keypoints.len())
            .filter(|&k| anchor_visible[k].is_some() && visible[k].is_some())
            .collect();
        if common.is_empty() {
            report
                .warnings
                .push(format!("pair ({}, {t}): no co-visible points, skipped", cfg.anchor));
            continue;
        }
        let mut chosen: Vec<usize> = if common.len() > cfg.n_points {
            index::sample(&mut rng, common.len(), cfg.n_points)
                .into_iter()
                .map(|k| common[k])
                .collect()
        } else {
            common.clone()
        };
        chosen.sort_unstable();
        let ids: Vec<u64> = chosen.iter().map(|&k| k as u64).collect();
        let ref_set = anchor_desc.select(&chosen);
        let tgt_set = target_desc.select(&chosen);
        let gt: BTreeMap<u64, u64> = ids.iter().map(|&k| (k, k)).collect();
        let map = matching_map(
            Keypoints::new(&ids, &ref_set)?,
            Keypoints::new(&ids, &tgt_set)?,
            &gt,
        )?;
        let angle = angle_between(&anchor_view.viewing_direction(), &view.viewing_direction())
            .expect("viewing directions are unit length");
        report.pairs.push(PairResult {
            anchor: cfg.anchor,
            target: t,
            angle_deg: angle,
            category: categorize_baseline(angle),
            points: chosen.len(),
            available_points: common.len(),
            map,
        });
    }

    let mut by_cat: BTreeMap<BaselineCategory, Vec<&PairResult>> = BTreeMap::new();
    for p in &report.pairs {
        by_cat.entry(p.category).or_default().push(p);
    }
    report.categories = by_cat
        .iter()
        .map(|(&category, pairs)| CategoryResult {
            category,
            map: pairs.iter().map(|p| p.map).sum::<f64>() / pairs.len() as f64,
            pairs: pairs.len(),
            points: pairs.iter().map(|p| p.points).sum(),
        })
        .collect();
    let regular: Vec<f64> = report
        .categories
        .iter()
        .filter(|c| c.category != BaselineCategory::OutOfRange)
        .map(|c| c.map)
        .collect();
    report.map = if regular.is_empty() {
        0.0
    } else {
        regular.iter().sum::<f64>() / regular.len() as f64
    };
    report.counts.insert("keypoints".into(), keypoints.len());
    report.counts.insert("pairs".into(), report.pairs.len());
    report
        .counts
        .insert("points".into(), report.pairs.iter().map(|p| p.points).sum());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{CameraIntrinsics, ImageView, SceneBuilder};
    use nalgebra::{Point3, UnitQuaternion, Vector3};

    #[test]
    fn categories_and_boundaries() {
        assert_eq!(categorize_baseline(0.0), BaselineCategory::Narrow);
        assert_eq!(categorize_baseline(10.0), BaselineCategory::Narrow);
        assert_eq!(categorize_baseline(30.0), BaselineCategory::Wide);
        assert_eq!(categorize_baseline(74.9), BaselineCategory::Wide);
        assert_eq!(categorize_baseline(75.0), BaselineCategory::VeryWide);
        assert_eq!(categorize_baseline(100.0), BaselineCategory::VeryWide);
        assert_eq!(categorize_baseline(130.0), BaselineCategory::VeryWide);
        assert_eq!(categorize_baseline(130.5), BaselineCategory::OutOfRange);
    }

    fn scene() -> SceneModel {
        let mut b = SceneBuilder::new();
        b.camera(CameraIntrinsics::simple_pinhole(1, 100.0, Point2::new(100.0, 100.0), 200, 200));
        b.view(ImageView::new(1, 1, UnitQuaternion::identity(), Vector3::zeros(), "a"));
        b.view(ImageView::new(2, 1, UnitQuaternion::identity(), Vector3::new(-1.0, 0.0, 0.0), "b"));
        // Projections into view 1 at x = 101 and x = 101.1.
        let p = Point3::new(0.1, 0.0, 10.0);
        let q = Point3::new(0.11, 0.0, 10.0);
        b.track(1, p, &[(1, Point2::new(101.0, 100.0), 2.0, 0.0), (2, Point2::new(91.0, 100.0), 2.0, 0.0)]);
        b.track(2, q, &[(1, Point2::new(101.1, 100.0), 2.0, 0.0)]);
        b.build().unwrap()
    }

    #[test]
    fn nearest_within_radius() {
        let s = scene();
        let t = PointTransfer::new(&s, 1).unwrap();
        assert_eq!(t.nearest(&Point2::new(100.0, 100.0), 3.0), Some(1));
        assert_eq!(t.nearest(&Point2::new(102.0, 100.0), 3.0), Some(2));
        assert_eq!(t.nearest(&Point2::new(106.0, 100.0), 3.0), None);
        let moved = transfer_point(&Point2::new(101.0, 100.0), 1, 2, &s, 3.0).unwrap();
        assert!((moved - Point2::new(91.0, 100.0)).norm() < 1e-9);
    }
}
