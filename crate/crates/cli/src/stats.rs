//! `stats`: counts and histograms of a built dataset.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use psforge::patch::dataset::decode_patch_file;
use psforge::sampler::PairList;
use serde::{Deserialize, Serialize};

use crate::build::{PAIR_FILE, PATCH_FILE};
use crate::error::{dataset_error, pair_list_error, read_file, read_text, CliError};

pub const ANGLE_BUCKETS: usize = 18;
pub const ANGLE_BUCKET_DEG: f64 = 10.0;
/// Width of a scale-ratio bucket in log2 units; the last bucket is open.
pub const RATIO_BUCKET_LOG2: f64 = 0.25;
pub const RATIO_BUCKETS: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioBucket {
    /// Lower bound of `log2(scale_ratio)`.
    pub log2_lo: f64,
    /// Upper bound, absent for the open last bucket.
    pub log2_hi: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub tracks: usize,
    pub images: usize,
    pub patches: usize,
    pub pairs: usize,
    pub tracks_with_pairs: usize,
    /// Pair counts per 10 degree viewpoint bucket over [0, 180].
    pub angle_histogram: Vec<usize>,
    pub ratio_histogram: Vec<RatioBucket>,
}

pub fn angle_bucket(angle_deg: f64) -> usize {
    ((angle_deg / ANGLE_BUCKET_DEG).floor().max(0.0) as usize).min(ANGLE_BUCKETS - 1)
}

pub fn ratio_bucket(ratio: f64) -> usize {
    let l = ratio.max(1.0).log2();
    ((l / RATIO_BUCKET_LOG2).floor() as usize).min(RATIO_BUCKETS - 1)
}

pub fn compute_stats(patch_bytes: &[u8], pairs: &PairList, patch_path: &Path) -> Result<DatasetStats, CliError> {
    let records = decode_patch_file(patch_bytes).map_err(|e| dataset_error(patch_path, e))?;
    let tracks: BTreeSet<u64> = records.iter().map(|r| r.track_id).collect();
    let images: BTreeSet<u32> = records.iter().map(|r| r.image_id).collect();
    let with_pairs: BTreeSet<u64> = pairs.pairs.iter().map(|p| p.track_id).collect();
    let mut angle_histogram = vec![0; ANGLE_BUCKETS];
    let mut ratio_histogram: Vec<RatioBucket> = (0..RATIO_BUCKETS)
        .map(|k| RatioBucket {
            log2_lo: k as f64 * RATIO_BUCKET_LOG2,
            log2_hi: (k + 1 < RATIO_BUCKETS).then(|| (k + 1) as f64 * RATIO_BUCKET_LOG2),
            count: 0,
        })
        .collect();
    for p in &pairs.pairs {
        angle_histogram[angle_bucket(p.angle_deg)] += 1;
        ratio_histogram[ratio_bucket(p.scale_ratio)].count += 1;
    }
    Ok(DatasetStats {
        tracks: tracks.len(),
        images: images.len(),
        patches: records.len(),
        pairs: pairs.len(),
        tracks_with_pairs: with_pairs.len(),
        angle_histogram,
        ratio_histogram,
    })
}

pub fn cmd_stats(dataset: &Path) -> Result<DatasetStats, CliError> {
    let patch_path = dataset.join(PATCH_FILE);
    let pair_path = dataset.join(PAIR_FILE);
    let bytes = read_file(&patch_path)?;
    let pairs = PairList::parse_tsv(&read_text(&pair_path)?).map_err(|e| pair_list_error(&pair_path, e))?;
    compute_stats(&bytes, &pairs, &patch_path)
}

impl DatasetStats {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stats serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("tracks", self.tracks),
            ("images", self.images),
            ("patches", self.patches),
            ("pairs", self.pairs),
            ("tracks_with_pairs", self.tracks_with_pairs),
        ] {
            let _ = writeln!(out, "{k:<18} {v}");
        }
        let _ = writeln!(out, "viewpoint angle (deg)");
        for (k, c) in self.angle_histogram.iter().enumerate() {
            let lo = k as f64 * ANGLE_BUCKET_DEG;
            let close = if k + 1 == ANGLE_BUCKETS { ']' } else { ')' };
            let _ = writeln!(out, "  [{:>3}, {:>3}{close} {c}", lo, lo + ANGLE_BUCKET_DEG);
        }
        let _ = writeln!(out, "scale ratio (log2)");
        for b in &self.ratio_histogram {
            match b.log2_hi {
                Some(hi) => {
                    let _ = writeln!(out, "  [{:.2}, {:.2}) {}", b.log2_lo, hi, b.count);
                }
                None => {
                    let _ = writeln!(out, "  [{:.2},  inf) {}", b.log2_lo, b.count);
                }
            }
        }
        out
    }
}
