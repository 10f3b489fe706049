//! Descriptor evaluation: average precision and the benchmark protocols built
//! on it, plus a report type shared by all of them.

mod ap;
pub mod hpatches;
pub mod strecha;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ap::average_precision;
pub use hpatches::{
    matching_map, nearest_neighbor, retrieval_map, verification_ap, verification_ap_descriptors,
    Keypoints, RetrievalResult, RetrievalTask,
};
pub use strecha::{
    categorize_baseline, strecha_protocol, transfer_point, BaselineCategory, PointTransfer,
    StrechaConfig, TRANSFER_RADIUS_PX,
};

use crate::scene::ImageId;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("average precision is undefined without relevant items")]
    NoRelevantItems,
    #[error("target keypoint set is empty")]
    EmptyTarget,
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("image {0} is not part of the scene")]
    UnknownImage(ImageId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryResult {
    pub category: BaselineCategory,
    pub map: f64,
    pub pairs: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub anchor: ImageId,
    pub target: ImageId,
    pub angle_deg: f64,
    pub category: BaselineCategory,
    pub points: usize,
    pub available_points: usize,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub map: f64,
    pub counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<CategoryResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_setting: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn new(task: impl Into<String>) -> Self {
        Self {
            task: task.into(),
            map: 0.0,
            counts: BTreeMap::new(),
            categories: Vec::new(),
            pairs: Vec::new(),
            per_setting: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned text table. Baseline reports get one column per category plus
    /// the mean; other tasks a single mAP column. Values are percentages.
    pub fn to_table(&self, method: &str) -> String {
        let mut out = String::new();
        let width = method.len().max(8);
        if self.task == "strecha" {
            let mut cols: Vec<BaselineCategory> = BaselineCategory::REGULAR
                .into_iter()
                .filter(|c| self.categories.iter().any(|r| r.category == *c))
                .collect();
            if self
                .categories
                .iter()
                .any(|r| r.category == BaselineCategory::OutOfRange)
            {
                cols.push(BaselineCategory::OutOfRange);
            }
            let _ = write!(out, "{:<width$}", "Method");
            for c in &cols {
                let _ = write!(out, " | {:>12}", c.label());
            }
            let _ = writeln!(out, " | {:>12}", "Mean");
            let _ = write!(out, "{:<width$}", method);
            for c in &cols {
                let v = self.categories.iter().find(|r| r.category == *c).map_or(0.0, |r| r.map);
                let _ = write!(out, " | {:>12.2}", 100.0 * v);
            }
            let _ = writeln!(out, " | {:>12.2}", 100.0 * self.map);
        } else {
            let _ = writeln!(out, "{:<width$} | {:>12} | {:>10}", "Method", self.task, "count");
            let count = self.counts.values().next().copied().unwrap_or(0);
            let _ = writeln!(out, "{:<width$} | {:>12.2} | {:>10}", method, 100.0 * self.map, count);
            for (n, v) in &self.per_setting {
                let _ = writeln!(out, "{:<width$} | {:>12.2} | {:>10}", format!("  @{n}"), 100.0 * v, n);
            }
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
