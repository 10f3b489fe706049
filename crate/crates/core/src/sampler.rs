//! Greedy max-min selection of viewpoint- and scale-diverse matching sets.
//!
//! For a reference patch `i` of a track, the matching set starts as `{i}` and
//! grows one patch per iteration. Each iteration considers the candidates
//! `j > i` within `max_v_th` of `i` that are not yet in the set, and picks the
//! one whose minimum viewpoint difference (MVD) to the current set is largest.
//! It is accepted iff
//!
//! ```text
//! (MVD_j >= min_v_th || s_rj > scale_jump) && s_ij < sc_th
//! ```
//!
//! where `r` is the set member nearest to `j` in viewpoint and `s_xy` is the
//! ratio of the two patches' `f/d` magnifications. The first rejection ends
//! the loop. Ties in both the argmax and the argmin go to the lowest patch
//! index.

use std::fmt::Write as _;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, ratio_of, AngleMatrix};
use crate::scene::{PointId, SceneModel};

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("patch index {index} out of range for a track of {len} patches")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("track geometry is inconsistent: {0}")]
    Inconsistent(String),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingThresholds {
    /// Upper bound on the scale ratio to the reference patch.
    pub sc_th: f64,
    /// Minimum viewpoint difference (degrees) for a diverse addition.
    pub min_v_th: f64,
    /// Maximum viewpoint difference (degrees) to the reference patch.
    pub max_v_th: f64,
    /// Scale ratio to the nearest member that admits a patch regardless of MVD.
    pub scale_jump: f64,
}

impl Default for SamplingThresholds {
    fn default() -> Self {
        Self {
            sc_th: 2.5,
            min_v_th: 25.0,
            max_v_th: 50.0,
            scale_jump: 1.5,
        }
    }
}

impl SamplingThresholds {
    /// Wider viewpoint range used for mostly planar scenes.
    pub fn planar() -> Self {
        Self {
            max_v_th: 75.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidThresholds(m.to_string()));
        if !(self.sc_th > 1.0) {
            return bad("sc_th must exceed 1");
        }
        if !(self.scale_jump > 1.0) {
            return bad("scale_jump must exceed 1");
        }
        if !(0.0 <= self.min_v_th && self.min_v_th <= self.max_v_th && self.max_v_th <= 180.0) {
            return bad("need 0 <= min_v_th <= max_v_th <= 180");
        }
        Ok(())
    }
}

/// Inclusive range of detector scales kept for sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleClamp {
    pub min: f64,
    pub max: f64,
}

impl Default for ScaleClamp {
    fn default() -> Self {
        Self { min: 1.6, max: 15.0 }
    }
}

impl ScaleClamp {
    pub fn contains(&self, s: f64) -> bool {
        s >= self.min && s <= self.max
    }
}

/// Focal lengths, depths and pairwise angles of the patches of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackGeometry {
    pub focal: Vec<f64>,
    pub depth: Vec<f64>,
    pub angles: AngleMatrix,
}

impl TrackGeometry {
    pub fn new(focal: Vec<f64>, depth: Vec<f64>, angles: AngleMatrix) -> Result<Self, SamplerError> {
        let n = angles.len();
        if focal.len() != n || depth.len() != n {
            return Err(SamplerError::Inconsistent(format!(
                "{} focals and {} depths for a {n}x{n} angle matrix",
                focal.len(),
                depth.len()
            )));
        }
        for (k, (&f, &d)) in focal.iter().zip(&depth).enumerate() {
            if !(f > 0.0 && d > 0.0 && f.is_finite() && d.is_finite()) {
                return Err(SamplerError::Inconsistent(format!(
                    "patch {k}: focal {f} and depth {d} must be positive"
                )));
            }
        }
        Ok(Self { focal, depth, angles })
    }

    /// Builds the geometry from per-patch focal lengths, depths and viewing directions.
    pub fn from_directions(
        focal: Vec<f64>,
        depth: Vec<f64>,
        directions: &[Vector3<f64>],
    ) -> Result<Self, SamplerError> {
        let angles = geometry::angle_matrix(directions)
            .map_err(|e| SamplerError::Inconsistent(e.to_string()))?;
        Self::new(focal, depth, angles)
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    fn magnification(&self, k: usize) -> f64 {
        self.focal[k] / self.depth[k]
    }

    pub fn scale_ratio(&self, a: usize, b: usize) -> f64 {
        ratio_of(self.magnification(a), self.magnification(b))
    }
}

/// The patches selected for one reference patch, in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSet {
    pub reference: usize,
    pub members: Vec<usize>,
}

impl MatchSet {
    /// Members other than the reference.
    pub fn matches(&self) -> &[usize] {
        &self.members[1..]
    }
}

pub fn build_match_set(
    i: usize,
    geom: &TrackGeometry,
    th: &SamplingThresholds,
) -> Result<MatchSet, SamplerError> {
    let n = geom.len();
    if i >= n {
        return Err(SamplerError::IndexOutOfRange { index: i, len: n });
    }
    let a = &geom.angles;

    let mut candidates: Vec<usize> = ((i + 1)..n).filter(|&k| a.get(i, k) <= th.max_v_th).collect();
    // Running MVD and the member realizing it, per patch index.
    let mut mvd = vec![f64::INFINITY; n];
    let mut nearest = vec![i; n];
    for &k in &candidates {
        mvd[k] = a.get(i, k);
    }

    let mut members = vec![i];
    loop {
        let mut best: Option<usize> = None;
        for &k in &candidates {
            if best.is_none_or(|b| mvd[k] > mvd[b]) {
                best = Some(k);
            }
        }
        let Some(j) = best else { break };
        let r = nearest[j];
        let s_ij = geom.scale_ratio(i, j);
        let s_rj = geom.scale_ratio(r, j);
        let accepted = (mvd[j] >= th.min_v_th || s_rj > th.scale_jump) && s_ij < th.sc_th;
        if !accepted {
            break;
        }
        members.push(j);
        candidates.retain(|&k| k != j);
        for &k in &candidates {
            let d = a.get(j, k);
            if d < mvd[k] || (d == mvd[k] && j < nearest[k]) {
                mvd[k] = d;
                nearest[k] = j;
            }
        }
    }
    Ok(MatchSet { reference: i, members })
}

/// All `(i, j)` pairs, `i < j`, produced by the matching sets of every patch.
pub fn sample_track_pairs(
    geom: &TrackGeometry,
    th: &SamplingThresholds,
) -> Result<Vec<(usize, usize)>, SamplerError> {
    Ok(track_match_sets(geom, th)?
        .iter()
        .flat_map(|ms| ms.matches().iter().map(move |&j| (ms.reference, j)))
        .collect())
}

fn track_match_sets(
    geom: &TrackGeometry,
    th: &SamplingThresholds,
) -> Result<Vec<MatchSet>, SamplerError> {
    (0..geom.len()).map(|i| build_match_set(i, geom, th)).collect()
}

/// One positive correspondence. `a` and `b` index the track's observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub track_id: PointId,
    pub a: usize,
    pub b: usize,
    pub angle_deg: f64,
    pub scale_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairList {
    pub pairs: Vec<Pair>,
}

#[derive(Debug, Error, PartialEq)]
#[error("pair list line {line}: {message}")]
pub struct PairListError {
    pub line: usize,
    pub message: String,
}

impl PairList {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sort_canonical(&mut self) {
        self.pairs.sort_by_key(|p| (p.track_id, p.a, p.b));
    }

    /// Tab-separated `track_id, patch_a, patch_b, angle_deg, scale_ratio`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::with_capacity(self.pairs.len() * 32);
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}",
                p.track_id, p.a, p.b, p.angle_deg, p.scale_ratio
            );
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self, PairListError> {
        let mut pairs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| PairListError {
                line: idx + 1,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(err(format!("expected 5 columns, got {}", cols.len())));
            }
            let int = |s: &str, what: &str| -> Result<u64, PairListError> {
                s.trim()
                    .parse()
                    .map_err(|_| err(format!("invalid {what} `{s}`")))
            };
            let real = |s: &str, what: &str| -> Result<f64, PairListError> {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("invalid {what} `{s}`")))
            };
            let track_id = int(cols[0], "track_id")?;
            let a = usize::try_from(int(cols[1], "patch_a")?).map_err(|e| err(e.to_string()))?;
            let b = usize::try_from(int(cols[2], "patch_b")?).map_err(|e| err(e.to_string()))?;
            if a >= b {
                return Err(err(format!("patch_a {a} must be below patch_b {b}")));
            }
            pairs.push(Pair {
                track_id,
                a,
                b,
                angle_deg: real(cols[3], "angle_deg")?,
                scale_ratio: real(cols[4], "scale_ratio")?,
            });
        }
        Ok(Self { pairs })
    }
}

/// Counters describing one sampling run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub tracks: usize,
    pub observations: usize,
    pub kept_observations: usize,
    pub dropped_behind_camera: usize,
    pub dropped_scale: usize,
}

/// Output of [`sample_scene`]. Match set members are observation indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneSample {
    pub pairs: PairList,
    pub match_sets: Vec<(PointId, Vec<MatchSet>)>,
    pub report: SamplingReport,
}

struct TrackSample {
    track_id: PointId,
    pairs: Vec<Pair>,
    match_sets: Vec<MatchSet>,
    observations: usize,
    dropped_behind: usize,
    dropped_scale: usize,
}

/// Observation indices of a track that survive the depth and scale filters,
/// with the geometry of the survivors.
pub fn track_geometry(
    scene: &SceneModel,
    track_id: PointId,
    clamp: &ScaleClamp,
) -> Option<(Vec<usize>, TrackGeometry)> {
    let (kept, geom, _, _) = filtered_geometry(scene, track_id, clamp)?;
    Some((kept, geom))
}

fn filtered_geometry(
    scene: &SceneModel,
    track_id: PointId,
    clamp: &ScaleClamp,
) -> Option<(Vec<usize>, TrackGeometry, usize, usize)> {
    let track = scene.tracks.get(&track_id)?;
    let mut kept = Vec::new();
    let mut focal = Vec::new();
    let mut depth = Vec::new();
    let mut dirs = Vec::new();
    let (mut behind, mut off_scale) = (0, 0);
    for (k, obs) in track.observations.iter().enumerate() {
        let view = &scene.views[&obs.image_id];
        let d = geometry::depth(&track.position, view);
        if !(d > 0.0) {
            behind += 1;
            continue;
        }
        if !clamp.contains(obs.scale) {
            off_scale += 1;
            continue;
        }
        kept.push(k);
        focal.push(scene.camera_of(view).focal_px());
        depth.push(d);
        dirs.push(view.viewing_direction());
    }
    let geom = TrackGeometry::from_directions(focal, depth, &dirs).ok()?;
    Some((kept, geom, behind, off_scale))
}

fn sample_one_track(
    scene: &SceneModel,
    track_id: PointId,
    th: &SamplingThresholds,
    clamp: &ScaleClamp,
) -> TrackSample {
    let observations = scene.tracks[&track_id].observations.len();
    let (kept, geom, dropped_behind, dropped_scale) =
        filtered_geometry(scene, track_id, clamp).expect("validated scene");
    let local_sets = track_match_sets(&geom, th).expect("indices in range");
    let mut pairs = Vec::new();
    let mut match_sets = Vec::with_capacity(local_sets.len());
    for ms in local_sets {
        for &j in ms.matches() {
            pairs.push(Pair {
                track_id,
                a: kept[ms.reference],
                b: kept[j],
                angle_deg: geom.angles.get(ms.reference, j),
                scale_ratio: geom.scale_ratio(ms.reference, j),
            });
        }
        match_sets.push(MatchSet {
            reference: kept[ms.reference],
            members: ms.members.iter().map(|&k| kept[k]).collect(),
        });
    }
    TrackSample {
        track_id,
        pairs,
        match_sets,
        observations,
        dropped_behind,
        dropped_scale,
    }
}

/// Runs the matching-set selection over every track of a scene.
///
/// Tracks are processed in parallel on the current rayon pool; the merged
/// pair list is sorted by `(track_id, a, b)` so the output does not depend on
/// scheduling.
pub fn sample_scene(
    scene: &SceneModel,
    th: &SamplingThresholds,
    clamp: &ScaleClamp,
) -> Result<SceneSample, SamplerError> {
    th.validate()?;
    let ids: Vec<PointId> = scene.tracks.keys().copied().collect();
    let per_track: Vec<TrackSample> = ids
        .par_iter()
        .map(|&id| sample_one_track(scene, id, th, clamp))
        .collect();

    let mut out = SceneSample::default();
    out.report.tracks = per_track.len();
    for t in per_track {
        out.report.observations += t.observations;
        out.report.dropped_behind_camera += t.dropped_behind;
        out.report.dropped_scale += t.dropped_scale;
        out.report.kept_observations += t.observations - t.dropped_behind - t.dropped_scale;
        out.pairs.pairs.extend(t.pairs);
        out.match_sets.push((t.track_id, t.match_sets));
    }
    out.pairs.sort_canonical();
    Ok(out)
}
