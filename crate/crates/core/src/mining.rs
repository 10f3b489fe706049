//! Hardest-in-batch negative mining with a geometric validity rule.
//!
//! A batch holds `m` matching pairs `(a_i, b_i)` from `m` distinct tracks.
//! With `D(i, j) = |a_i - b_j|`, each row contributes
//!
//! ```text
//! max(0, margin + D(i, i) - min(min_j D(i, j), min_k D(k, i)))
//! ```
//!
//! where `j` ranges over the positives that are valid negatives for `a_i` and
//! `k` over the anchors that are valid negatives for `b_i`. Rows with no valid
//! negative on either side are skipped, and the loss is the mean over the
//! remaining rows.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, Point2};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::descriptors::{l2_distance, DescriptorSet, ValidityMask};
use crate::geometry::project;
use crate::patch::PatchRecord;
use crate::sampler::PairList;
use crate::scene::{common_images, ImageId, PointId, SceneModel, Track};

pub const DEFAULT_MARGIN: f64 = 1.0;
const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum MiningError {
    #[error("margin must be positive, got {0}")]
    NonPositiveMargin(f64),
    #[error("distance matrix is {rows}x{cols} but the masks are {m}x{m}")]
    ShapeMismatch { rows: usize, cols: usize, m: usize },
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("need {needed} distinct tracks, only {available} available")]
    InsufficientData { needed: usize, available: usize },
}

/// Anchor and positive descriptors for `m` matching pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorBatch {
    pub anchors: DescriptorSet,
    pub positives: DescriptorSet,
    pub anchor_track: Vec<PointId>,
    pub positive_track: Vec<PointId>,
}

impl DescriptorBatch {
    pub fn new(
        anchors: DescriptorSet,
        positives: DescriptorSet,
        anchor_track: Vec<PointId>,
        positive_track: Vec<PointId>,
    ) -> Result<Self, MiningError> {
        let m = anchors.len();
        if positives.len() != m || anchor_track.len() != m || positive_track.len() != m {
            return Err(MiningError::InvalidBatch("row counts differ".into()));
        }
        if m > 0 && anchors.dim() != positives.dim() {
            return Err(MiningError::InvalidBatch("descriptor dimensions differ".into()));
        }
        if anchor_track != positive_track {
            return Err(MiningError::InvalidBatch(
                "anchor and positive tracks must agree row by row".into(),
            ));
        }
        for (name, set) in [("anchor", &anchors), ("positive", &positives)] {
            for (i, row) in set.rows().enumerate() {
                let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > NORM_TOLERANCE {
                    return Err(MiningError::InvalidBatch(format!(
                        "{name} {i} has norm {norm}, expected unit length"
                    )));
                }
            }
        }
        Ok(Self {
            anchors,
            positives,
            anchor_track,
            positive_track,
        })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// `D(i, j)` = Euclidean distance between anchor `i` and positive `j`.
pub fn distance_matrix(batch: &DescriptorBatch) -> DMatrix<f64> {
    let m = batch.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let a = batch.anchors.row(i);
            (0..m).map(|j| l2_distance(a, batch.positives.row(j))).collect()
        })
        .collect();
    DMatrix::from_fn(m, m, |i, j| rows[i][j])
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub loss: f64,
    pub hardest_neg_for_anchor: Vec<Option<usize>>,
    pub hardest_neg_for_positive: Vec<Option<usize>>,
    pub active_rows: usize,
}

/// Index and value of the smallest `values[k]` over `k` with `valid(k)`;
/// ties go to the lowest index.
fn masked_argmin(m: usize, valid: impl Fn(usize) -> bool, value: impl Fn(usize) -> f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for k in (0..m).filter(|&k| valid(k)) {
        let v = value(k);
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((k, v));
        }
    }
    best
}

pub fn batch_hard_loss(
    d: &DMatrix<f64>,
    masks: &ValidityMask,
    margin: f64,
) -> Result<LossResult, MiningError> {
    if !(margin > 0.0) {
        return Err(MiningError::NonPositiveMargin(margin));
    }
    let m = masks.len();
    if d.nrows() != m || d.ncols() != m {
        return Err(MiningError::ShapeMismatch {
            rows: d.nrows(),
            cols: d.ncols(),
            m,
        });
    }
    let mut hardest_a = Vec::with_capacity(m);
    let mut hardest_p = Vec::with_capacity(m);
    let mut total = 0.0;
    let mut active = 0;
    for i in 0..m {
        let neg_a = masked_argmin(m, |j| masks.anchor_vs_positive(i, j), |j| d[(i, j)]);
        let neg_p = masked_argmin(m, |k| masks.positive_vs_anchor(i, k), |k| d[(k, i)]);
        hardest_a.push(neg_a.map(|(j, _)| j));
        hardest_p.push(neg_p.map(|(k, _)| k));
        let hardest = match (neg_a, neg_p) {
            (None, None) => continue,
            (Some((_, x)), None) | (None, Some((_, x))) => x,
            (Some((_, x)), Some((_, y))) => x.min(y),
        };
        total += (margin + d[(i, i)] - hardest).max(0.0);
        active += 1;
    }
    Ok(LossResult {
        loss: if active == 0 { 0.0 } else { total / active as f64 },
        hardest_neg_for_anchor: hardest_a,
        hardest_neg_for_positive: hardest_p,
        active_rows: active,
    })
}

/// Image location of a track in one of its images: the projection of the 3D
/// point, or the observed keypoint when the point projects behind the camera.
fn location_in(scene: &SceneModel, track: &Track, image_id: ImageId) -> Option<Point2<f64>> {
    let view = scene.view(image_id)?;
    project(&track.position, view, scene.camera_of(view))
        .ok()
        .or_else(|| track.observation_in(image_id).map(|o| o.xy))
}

/// Whether a patch of `track_q` may serve as a negative for a patch of
/// `track_p`. Tracks never co-visible are always valid; otherwise the two
/// points must lie more than half the larger crop side apart in every image
/// they share.
pub fn valid_negative(
    track_p: &Track,
    track_q: &Track,
    scene: &SceneModel,
    crop_side_p: f64,
    crop_side_q: f64,
) -> bool {
    if track_p.point_id == track_q.point_id {
        return false;
    }
    let threshold = 0.5 * crop_side_p.max(crop_side_q);
    common_images(track_p, track_q).into_iter().all(|img| {
        match (location_in(scene, track_p, img), location_in(scene, track_q, img)) {
            (Some(p), Some(q)) => (p - q).norm() > threshold,
            _ => false,
        }
    })
}

/// Patch lookup by `(track_id, image_id)`.
#[derive(Debug, Clone, Default)]
pub struct PatchIndex {
    rows: HashMap<(PointId, ImageId), usize>,
    crop_sides: Vec<f64>,
}

impl PatchIndex {
    pub fn new(records: &[PatchRecord]) -> Self {
        let rows = records
            .iter()
            .enumerate()
            .map(|(k, r)| ((r.track_id, r.image_id), k))
            .collect();
        Self {
            rows,
            crop_sides: records.iter().map(|r| r.crop_side_px).collect(),
        }
    }

    pub fn row(&self, track_id: PointId, image_id: ImageId) -> Option<usize> {
        self.rows.get(&(track_id, image_id)).copied()
    }

    pub fn crop_side(&self, row: usize) -> f64 {
        self.crop_sides[row]
    }

    pub fn len(&self) -> usize {
        self.crop_sides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crop_sides.is_empty()
    }
}

/// How the positive pair of a sampled track is chosen.
#[derive(Debug, Clone, Copy)]
pub enum PositiveChoice<'a> {
    /// Uniformly among the track's pairs.
    Random,
    /// The pair whose descriptors are furthest apart. Rows follow the patch file.
    Hardest(&'a DescriptorSet),
}

/// Rows of the patch file forming one batch, with the validity masks.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchScaffold {
    pub tracks: Vec<PointId>,
    pub anchor_rows: Vec<usize>,
    pub positive_rows: Vec<usize>,
    pub masks: ValidityMask,
}

impl BatchScaffold {
    /// Gathers the descriptors of the scaffold's rows into a batch.
    pub fn descriptors(&self, all: &DescriptorSet) -> Result<DescriptorBatch, MiningError> {
        DescriptorBatch::new(
            all.select(&self.anchor_rows),
            all.select(&self.positive_rows),
            self.tracks.clone(),
            self.tracks.clone(),
        )
    }
}

/// Draws `m` distinct tracks and one positive pair from each, then computes
/// the validity masks.
pub fn sample_batch(
    pairs: &PairList,
    scene: &SceneModel,
    patches: &PatchIndex,
    m: usize,
    seed: u64,
    choice: PositiveChoice<'_>,
) -> Result<BatchScaffold, MiningError> {
    // Per track: candidate (anchor_row, positive_row) pairs present in the patch file.
    let mut by_track: BTreeMap<PointId, Vec<(usize, usize)>> = BTreeMap::new();
    for p in &pairs.pairs {
        let Some(track) = scene.tracks.get(&p.track_id) else {
            continue;
        };
        let (Some(oa), Some(ob)) = (track.observations.get(p.a), track.observations.get(p.b)) else {
            continue;
        };
        if let (Some(ra), Some(rb)) = (
            patches.row(p.track_id, oa.image_id),
            patches.row(p.track_id, ob.image_id),
        ) {
            by_track.entry(p.track_id).or_default().push((ra, rb));
        }
    }
    let available = by_track.len();
    if available < m {
        return Err(MiningError::InsufficientData { needed: m, available });
    }
    if let PositiveChoice::Hardest(d) = choice {
        if d.len() != patches.len() {
            return Err(MiningError::InvalidBatch(format!(
                "{} descriptors for {} patches",
                d.len(),
                patches.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let track_ids: Vec<PointId> = by_track.keys().copied().collect();
    let picked = index::sample(&mut rng, available, m);

    let mut tracks = Vec::with_capacity(m);
    let mut anchor_rows = Vec::with_capacity(m);
    let mut positive_rows = Vec::with_capacity(m);
    for t in picked.iter() {
        let id = track_ids[t];
        let cands = &by_track[&id];
        let (a, b) = match choice {
            PositiveChoice::Random => cands[rng.random_range(0..cands.len())],
            PositiveChoice::Hardest(d) => {
                let mut best = cands[0];
                let mut best_d = f64::NEG_INFINITY;
                for &(a, b) in cands {
                    let dist = l2_distance(d.row(a), d.row(b));
                    if dist > best_d {
                        best_d = dist;
                        best = (a, b);
                    }
                }
                best
            }
        };
        tracks.push(id);
        anchor_rows.push(a);
        positive_rows.push(b);
    }

    let rows: Vec<(Vec<bool>, Vec<bool>)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let ti = &scene.tracks[&tracks[i]];
            let mut avp = vec![false; m];
            let mut pva = vec![false; m];
            for j in 0..m {
                if i == j {
                    continue;
                }
                let tj = &scene.tracks[&tracks[j]];
                avp[j] = valid_negative(
                    ti,
                    tj,
                    scene,
                    patches.crop_side(anchor_rows[i]),
                    patches.crop_side(positive_rows[j]),
                );
                pva[j] = valid_negative(
                    ti,
                    tj,
                    scene,
                    patches.crop_side(positive_rows[i]),
                    patches.crop_side(anchor_rows[j]),
                );
            }
            (avp, pva)
        })
        .collect();
    let (avp, pva): (Vec<Vec<bool>>, Vec<Vec<bool>>) = rows.into_iter().unzip();
    let masks = ValidityMask::new(m, avp.concat(), pva.concat())
        .map_err(|e| MiningError::InvalidBatch(e.to_string()))?;
    Ok(BatchScaffold {
        tracks,
        anchor_rows,
        positive_rows,
        masks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{CameraIntrinsics, ImageView, SceneBuilder};
    use nalgebra::{Point3, UnitQuaternion, Vector3};

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
    }

    #[test]
    fn satisfied_margin_gives_zero() {
        let r = batch_hard_loss(&mat(&[&[0.0, 2.0], &[2.0, 0.0]]), &ValidityMask::full(2), 1.0).unwrap();
        assert_eq!(r.loss, 0.0);
        assert_eq!(r.active_rows, 2);
    }

    #[test]
    fn hand_fixture() {
        let r = batch_hard_loss(&mat(&[&[0.5, 0.6], &[0.7, 0.4]]), &ValidityMask::full(2), 1.0).unwrap();
        assert!((r.loss - 0.85).abs() < 1e-12);
        assert_eq!(r.hardest_neg_for_anchor, vec![Some(1), Some(0)]);
        assert_eq!(r.hardest_neg_for_positive, vec![Some(1), Some(0)]);
    }

    #[test]
    fn empty_masks_give_zero_loss() {
        let r = batch_hard_loss(&mat(&[&[0.5, 0.6], &[0.7, 0.4]]), &ValidityMask::empty(2), 1.0).unwrap();
        assert_eq!((r.loss, r.active_rows), (0.0, 0));
        assert_eq!(r.hardest_neg_for_anchor, vec![None, None]);
    }

    #[test]
    fn one_sided_masks_use_the_available_side() {
        // Only anchor 0 sees a negative (positive 1 at 0.6): 1 + 0.5 - 0.6.
        let mask = ValidityMask::new(2, vec![false, true, false, false], vec![false; 4]).unwrap();
        let r = batch_hard_loss(&mat(&[&[0.5, 0.6], &[0.7, 0.4]]), &mask, 1.0).unwrap();
        assert_eq!(r.active_rows, 1);
        assert!((r.loss - 0.9).abs() < 1e-12);
    }

    #[test]
    fn margin_must_be_positive() {
        let err = batch_hard_loss(&mat(&[&[0.0]]), &ValidityMask::full(1), 0.0).unwrap_err();
        assert_eq!(err, MiningError::NonPositiveMargin(0.0));
    }

    #[test]
    fn distance_matrix_of_orthonormal_rows() {
        let rows = [[1.0f32, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let set = DescriptorSet::from_rows(&rows).unwrap();
        let batch = DescriptorBatch::new(set.clone(), set, vec![1, 2, 3], vec![1, 2, 3]).unwrap();
        let d = distance_matrix(&batch);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 2f64.sqrt() };
                assert!((d[(i, j)] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_rejects_non_unit_and_mismatched_tracks() {
        let a = DescriptorSet::from_rows(&[[2.0f32, 0.0]]).unwrap();
        assert!(DescriptorBatch::new(a.clone(), a, vec![1], vec![1]).is_err());
        let u = DescriptorSet::from_rows(&[[1.0f32, 0.0]]).unwrap();
        assert!(DescriptorBatch::new(u.clone(), u, vec![1], vec![2]).is_err());
    }

    /// One camera at the origin looking down +z (f = 100, pp = (200, 200)) and
    /// a second camera far to the side that sees only track 3.
    fn two_view_scene() -> SceneModel {
        let mut b = SceneBuilder::new();
        b.camera(CameraIntrinsics::simple_pinhole(1, 100.0, Point2::new(200.0, 200.0), 400, 400));
        b.view(ImageView::new(1, 1, UnitQuaternion::identity(), Vector3::zeros(), "a"));
        b.view(ImageView::new(2, 1, UnitQuaternion::identity(), Vector3::new(-50.0, 0.0, 0.0), "b"));
        let px = |p: Point3<f64>, shift: f64| Point2::new(100.0 * (p.x + shift) / p.z + 200.0, 100.0 * p.y / p.z + 200.0);
        let p1 = Point3::new(0.0, 0.0, 10.0);
        let p2 = Point3::new(1.0, 0.0, 10.0);
        let p3 = Point3::new(50.0, 0.0, 10.0);
        b.track(1, p1, &[(1, px(p1, 0.0), 2.0, 0.0)]);
        b.track(2, p2, &[(1, px(p2, 0.0), 2.0, 0.0)]);
        b.track(3, p3, &[(2, px(p3, -50.0), 2.0, 0.0)]);
        b.build().unwrap()
    }

    #[test]
    fn validity_rule() {
        let scene = two_view_scene();
        let t = |id| &scene.tracks[&id];
        assert!(!valid_negative(t(1), t(1), &scene, 20.0, 20.0));
        // Never co-visible.
        assert!(valid_negative(t(1), t(3), &scene, 128.0, 128.0));
        // Co-visible, 10 px apart.
        assert!(!valid_negative(t(1), t(2), &scene, 128.0, 128.0));
        assert!(!valid_negative(t(1), t(2), &scene, 20.0, 20.0));
        assert!(valid_negative(t(1), t(2), &scene, 19.9, 19.0));
    }
}
