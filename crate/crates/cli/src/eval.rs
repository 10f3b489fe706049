//! `eval`: descriptor evaluation on a built dataset or a scene.
//!
//! Patch-level tasks read `patches.psds` and a descriptor file whose row `k`
//! describes patch `k`. The baseline task reads a scene, a keypoint list and
//! one descriptor file per image (`<image_id>.psde`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use nalgebra::Point2;
use psforge::descriptors::DescriptorSet;
use psforge::evaluation::{
    matching_map, retrieval_map, strecha_protocol, verification_ap_descriptors, EvalReport, Keypoints,
    RetrievalTask, StrechaConfig,
};
use psforge::evaluation::strecha::DEFAULT_POINTS_PER_PAIR;
use psforge::patch::dataset::decode_patch_file;
use psforge::patch::PatchRecord;
use psforge::scene::{read_scene_dir, ImageId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::build::PATCH_FILE;
use crate::error::{dataset_error, descriptor_error, read_file, read_text, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTask {
    Match,
    Verify,
    Retrieve,
    Strecha,
}

impl EvalTask {
    pub fn name(self) -> &'static str {
        match self {
            Self::Match => "match",
            Self::Verify => "verify",
            Self::Retrieve => "retrieve",
            Self::Strecha => "strecha",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub task: EvalTask,
    /// Directory holding `patches.psds`.
    pub dataset: Option<PathBuf>,
    pub descriptors: Option<PathBuf>,
    /// Verification pairs `row_a<TAB>row_b<TAB>label`; derived from the
    /// patch tracks when absent.
    pub labels: Option<PathBuf>,
    pub reference_image: Option<ImageId>,
    pub target_image: Option<ImageId>,
    pub distractors: Vec<usize>,
    pub scene: Option<PathBuf>,
    pub descriptor_dir: Option<PathBuf>,
    /// Keypoints `x y` per line in the keypoint image; its scene keypoints
    /// when absent.
    pub keypoints: Option<PathBuf>,
    pub keypoint_image: Option<ImageId>,
    pub anchor_image: Option<ImageId>,
    pub targets: Vec<ImageId>,
    pub n_points: usize,
    pub seed: u64,
}

impl EvalArgs {
    pub fn new(task: EvalTask) -> Self {
        Self {
            task,
            dataset: None,
            descriptors: None,
            labels: None,
            reference_image: None,
            target_image: None,
            distractors: Vec::new(),
            scene: None,
            descriptor_dir: None,
            keypoints: None,
            keypoint_image: None,
            anchor_image: None,
            targets: Vec::new(),
            n_points: DEFAULT_POINTS_PER_PAIR,
            seed: 0,
        }
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| CliError::Config(format!("{flag} is required for this task")))
}

fn load_descriptors(path: &Path) -> Result<DescriptorSet, CliError> {
    DescriptorSet::decode(&read_file(path)?).map_err(|e| descriptor_error(path, e))
}

fn load_aligned(args: &EvalArgs) -> Result<(Vec<PatchRecord>, DescriptorSet), CliError> {
    let path = required(&args.dataset, "--dataset")?.join(PATCH_FILE);
    let patches = decode_patch_file(&read_file(&path)?).map_err(|e| dataset_error(&path, e))?;
    let desc = load_descriptors(required(&args.descriptors, "--descriptors")?)?;
    if desc.len() != patches.len() {
        return Err(CliError::Alignment(format!(
            "{} descriptor rows for {} patches",
            desc.len(),
            patches.len()
        )));
    }
    Ok((patches, desc))
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport, CliError> {
    match args.task {
        EvalTask::Match => eval_match(args),
        EvalTask::Verify => eval_verify(args),
        EvalTask::Retrieve => eval_retrieve(args),
        EvalTask::Strecha => eval_strecha(args),
    }
}

fn eval_match(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let (patches, desc) = load_aligned(args)?;
    let mut by_image: BTreeMap<ImageId, Vec<usize>> = BTreeMap::new();
    for (row, p) in patches.iter().enumerate() {
        by_image.entry(p.image_id).or_default().push(row);
    }
    let image_pairs: Vec<(ImageId, ImageId)> = match (args.reference_image, args.target_image) {
        (Some(r), Some(t)) => vec![(r, t)],
        (None, None) => {
            let ids: Vec<ImageId> = by_image.keys().copied().collect();
            let tracks = |i: ImageId| -> BTreeSet<u64> { by_image[&i].iter().map(|&r| patches[r].track_id).collect() };
            let mut out = Vec::new();
            for (k, &a) in ids.iter().enumerate() {
                let ta = tracks(a);
                for &b in &ids[k + 1..] {
                    if !ta.is_disjoint(&tracks(b)) {
                        out.push((a, b));
                    }
                }
            }
            out
        }
        _ => {
            return Err(CliError::Config(
                "--reference-image and --target-image go together".into(),
            ))
        }
    };

    let mut report = EvalReport::new("match");
    let mut sum = 0.0;
    let mut keypoints = 0;
    let empty = Vec::new();
    for &(r, t) in &image_pairs {
        let rows_r = by_image.get(&r).unwrap_or(&empty);
        let rows_t = by_image.get(&t).unwrap_or(&empty);
        let ids_r: Vec<u64> = rows_r.iter().map(|&k| patches[k].track_id).collect();
        let ids_t: Vec<u64> = rows_t.iter().map(|&k| patches[k].track_id).collect();
        let in_t: BTreeSet<u64> = ids_t.iter().copied().collect();
        let gt: BTreeMap<u64, u64> = ids_r.iter().filter(|id| in_t.contains(id)).map(|&id| (id, id)).collect();
        let dr = desc.select(rows_r);
        let dt = desc.select(rows_t);
        let map = matching_map(Keypoints::new(&ids_r, &dr)?, Keypoints::new(&ids_t, &dt)?, &gt)?;
        sum += map;
        keypoints += ids_r.len();
    }
    report.map = if image_pairs.is_empty() { 0.0 } else { sum / image_pairs.len() as f64 };
    if image_pairs.is_empty() {
        report.warnings.push("no image pair shares a track".into());
    }
    report.counts.insert("image_pairs".into(), image_pairs.len());
    report.counts.insert("keypoints".into(), keypoints);
    Ok(report)
}

/// Positive pairs join consecutive patches of a track; as many negative pairs
/// join random patches of different tracks.
pub fn derived_verification_pairs(patches: &[PatchRecord], seed: u64) -> Vec<(usize, usize, bool)> {
    let mut out = Vec::new();
    for k in 1..patches.len() {
        if patches[k].track_id == patches[k - 1].track_id {
            out.push((k - 1, k, true));
        }
    }
    let positives = out.len();
    let distinct: BTreeSet<u64> = patches.iter().map(|p| p.track_id).collect();
    if distinct.len() < 2 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = patches.len();
    let mut added = 0;
    while added < positives {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if patches[a].track_id != patches[b].track_id {
            out.push((a, b, false));
            added += 1;
        }
    }
    out
}

pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<(usize, usize, bool)>, CliError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: &str| CliError::parse(path, format!("line {}: {m}", idx + 1));
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(err("expected `row_a row_b label`"));
        }
        let a = cols[0].parse().map_err(|_| err("invalid row_a"))?;
        let b = cols[1].parse().map_err(|_| err("invalid row_b"))?;
        let label = match cols[2] {
            "1" => true,
            "0" => false,
            _ => return Err(err("label must be 0 or 1")),
        };
        out.push((a, b, label));
    }
    Ok(out)
}

fn eval_verify(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let (patches, desc) = load_aligned(args)?;
    let pairs = match &args.labels {
        Some(p) => parse_labels(&read_text(p)?, p)?,
        None => derived_verification_pairs(&patches, args.seed),
    };
    if let Some(&(a, b, _)) = pairs.iter().find(|(a, b, _)| *a >= desc.len() || *b >= desc.len()) {
        return Err(CliError::Alignment(format!(
            "pair ({a}, {b}) references a row beyond {} descriptors",
            desc.len()
        )));
    }
    let left = desc.select(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let right = desc.select(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let labels: Vec<bool> = pairs.iter().map(|p| p.2).collect();
    let mut report = EvalReport::new("verify");
    report.map = verification_ap_descriptors(&left, &right, &labels)?;
    report.counts.insert("pairs".into(), pairs.len());
    report.counts.insert("positives".into(), labels.iter().filter(|&&l| l).count());
    Ok(report)
}

fn eval_retrieve(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let (patches, desc) = load_aligned(args)?;
    let mut rows_of: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (row, p) in patches.iter().enumerate() {
        rows_of.entry(p.track_id).or_default().push(row);
    }
    let query_rows: Vec<usize> = rows_of.values().filter(|r| r.len() >= 2).map(|r| r[0]).collect();
    let is_query: BTreeSet<usize> = query_rows.iter().copied().collect();
    let pool_rows: Vec<usize> = (0..patches.len()).filter(|r| !is_query.contains(r)).collect();
    let relevant: Vec<BTreeSet<usize>> = query_rows
        .iter()
        .map(|&q| {
            let t = patches[q].track_id;
            pool_rows
                .iter()
                .enumerate()
                .filter(|(_, &r)| patches[r].track_id == t)
                .map(|(k, _)| k)
                .collect()
        })
        .collect();
    let task = RetrievalTask {
        queries: desc.select(&query_rows),
        pool: desc.select(&pool_rows),
        relevant,
        distractor_counts: args.distractors.clone(),
    };
    let result = retrieval_map(&task)?;
    let mut report = EvalReport::new("retrieve");
    report.map = result.map;
    report.per_setting = result.per_setting;
    report.counts.insert("queries".into(), query_rows.len());
    report.counts.insert("pool".into(), pool_rows.len());
    Ok(report)
}

pub fn parse_keypoints(text: &str, path: &Path) -> Result<Vec<Point2<f64>>, CliError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| CliError::parse(path, format!("line {}: invalid number", idx + 1)))?;
        if v.len() < 2 {
            return Err(CliError::parse(path, format!("line {}: expected `x y`", idx + 1)));
        }
        out.push(Point2::new(v[0], v[1]));
    }
    Ok(out)
}

fn eval_strecha(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let scene = read_scene_dir(required(&args.scene, "--scene")?)?;
    let dir = required(&args.descriptor_dir, "--descriptor-dir")?;
    let first = scene.views.keys().next().copied();
    let anchor = args
        .anchor_image
        .or(first)
        .ok_or_else(|| CliError::Config("scene has no images".into()))?;
    let source = args.keypoint_image.unwrap_or(anchor);
    let keypoints = match &args.keypoints {
        Some(p) => parse_keypoints(&read_text(p)?, p)?,
        None => scene
            .view(source)
            .ok_or_else(|| CliError::Config(format!("keypoint image {source} is not in the scene")))?
            .keypoints
            .iter()
            .map(|k| k.xy)
            .collect(),
    };
    let mut descriptors = BTreeMap::new();
    for &id in scene.views.keys() {
        let path = dir.join(format!("{id}.psde"));
        if path.is_file() {
            descriptors.insert(id, load_descriptors(&path)?);
        }
    }
    let cfg = StrechaConfig {
        targets: args.targets.clone(),
        n_points: args.n_points,
        seed: args.seed,
        ..StrechaConfig::new(source, anchor)
    };
    Ok(strecha_protocol(&scene, &keypoints, &descriptors, &cfg)?)
}
