//! `build`: scene + images -> patch file, pair list and manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use psforge::patch::dataset::{encode_patch_file, Manifest, ManifestCounts, PATCH_FORMAT_VERSION};
use psforge::patch::image::{decode_pnm, RawImage};
use psforge::patch::{extract_patch_with, PatchRecord};
use psforge::sampler::{sample_scene, track_geometry};
use psforge::scene::{read_scene_dir, ImageId, PointId, SceneModel};
use rayon::prelude::*;

use crate::config::{thread_pool, RunConfig};
use crate::error::{image_error, read_file, write_file, CliError};

pub const PATCH_FILE: &str = "patches.psds";
pub const PAIR_FILE: &str = "pairs.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// A patch with its `(track_id, observation index)` sort key.
type KeyedPatch = ((PointId, usize), PatchRecord);

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| CliError::Config(format!("missing {what} path")))
}

/// Image file for a view: the exact name first, then the same stem with a
/// `.ppm` or `.pgm` extension.
pub fn find_image(images: &Path, name: &str) -> Option<PathBuf> {
    let exact = images.join(name);
    if exact.is_file() {
        return Some(exact);
    }
    ["ppm", "pgm"]
        .iter()
        .map(|ext| exact.with_extension(ext))
        .find(|p| p.is_file())
}

/// Every observation that survives the sampling filters, as
/// `(track_id, observation index)`, grouped by image.
fn exported_observations(
    scene: &SceneModel,
    cfg: &RunConfig,
) -> BTreeMap<ImageId, Vec<(PointId, usize)>> {
    let per_track: Vec<(PointId, Vec<usize>)> = scene
        .tracks
        .keys()
        .copied()
        .collect::<Vec<_>>()
        .par_iter()
        .filter_map(|&id| track_geometry(scene, id, &cfg.scale_clamp).map(|(kept, _)| (id, kept)))
        .collect();
    let mut by_image: BTreeMap<ImageId, Vec<(PointId, usize)>> = BTreeMap::new();
    for (id, kept) in per_track {
        let track = &scene.tracks[&id];
        for k in kept {
            by_image.entry(track.observations[k].image_id).or_default().push((id, k));
        }
    }
    by_image
}

fn load_image(path: &Path) -> Result<RawImage, CliError> {
    decode_pnm(&read_file(path)?).map_err(|e| image_error(path, e))
}

pub fn cmd_build(cfg: &RunConfig) -> Result<BuildOutput, CliError> {
    cfg.validate()?;
    let pool = thread_pool(cfg.threads)?;
    pool.install(|| build(cfg))
}

fn build(cfg: &RunConfig) -> Result<BuildOutput, CliError> {
    let scene_dir = required(&cfg.scene, "scene")?;
    let images_dir = required(&cfg.images, "images")?;
    let out_dir = required(&cfg.out, "output")?;
    if !images_dir.is_dir() {
        return Err(CliError::io(
            images_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "image directory not found"),
        ));
    }
    let scene = read_scene_dir(scene_dir)?;
    let sample = sample_scene(&scene, &cfg.thresholds, &cfg.scale_clamp)?;

    let by_image = exported_observations(&scene, cfg);
    let mut files = Vec::with_capacity(by_image.len());
    for &image_id in by_image.keys() {
        let name = &scene.views[&image_id].name;
        let path = find_image(images_dir, name).ok_or_else(|| CliError::MissingImage(images_dir.join(name)))?;
        files.push(path);
    }

    let jobs: Vec<(&Vec<(PointId, usize)>, &PathBuf)> = by_image.values().zip(&files).collect();
    let per_image: Vec<Result<Vec<KeyedPatch>, CliError>> = jobs
        .par_iter()
        .map(|&(obs, path)| {
            let image = load_image(path)?;
            Ok(obs
                .par_iter()
                .map(|&(track_id, k)| {
                    let o = &scene.tracks[&track_id].observations[k];
                    ((track_id, k), extract_patch_with(&image, o, track_id, cfg.rotation_convention))
                })
                .collect())
        })
        .collect();
    let mut keyed = Vec::new();
    for r in per_image {
        keyed.extend(r?);
    }
    keyed.sort_by_key(|(key, _)| *key);
    let patches: Vec<PatchRecord> = keyed.into_iter().map(|(_, p)| p).collect();

    let tracks_with_pairs: BTreeSet<PointId> = sample.pairs.pairs.iter().map(|p| p.track_id).collect();
    let manifest = Manifest {
        format_version: PATCH_FORMAT_VERSION,
        scene_name: scene_name(scene_dir),
        thresholds: cfg.thresholds,
        scale_clamp: cfg.scale_clamp,
        rotation_convention: cfg.rotation_convention,
        config_hash: cfg.hash(),
        counts: ManifestCounts {
            views: scene.views.len(),
            tracks: scene.tracks.len(),
            observations: sample.report.observations,
            patches: patches.len(),
            pairs: sample.pairs.len(),
            tracks_with_pairs: tracks_with_pairs.len(),
            dropped_behind_camera: sample.report.dropped_behind_camera,
            dropped_scale: sample.report.dropped_scale,
        },
    };

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    write_file(&out_dir.join(PATCH_FILE), encode_patch_file(&patches))?;
    write_file(&out_dir.join(PAIR_FILE), sample.pairs.to_tsv())?;
    write_file(&out_dir.join(MANIFEST_FILE), manifest.to_json())?;
    Ok(BuildOutput {
        out_dir: out_dir.to_path_buf(),
        manifest,
    })
}

/// Last path component of the scene directory, skipping a trailing
/// `sparse/<n>` or `sparse` as laid out by COLMAP.
fn scene_name(dir: &Path) -> String {
    let parts: Vec<String> = dir
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .filter(|c| c != "." && !c.is_empty())
        .collect();
    let mut end = parts.len();
    if end >= 2 && parts[end - 2] == "sparse" && parts[end - 1].chars().all(|c| c.is_ascii_digit()) {
        end -= 2;
    } else if end >= 1 && parts[end - 1] == "sparse" {
        end -= 1;
    }
    end.checked_sub(1).map_or_else(String::new, |k| parts[k].clone())
}
