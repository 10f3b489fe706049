//! Patch verification, image matching and patch retrieval.
//!
//! Similarity is the negated L2 distance between descriptors in all three tasks.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{average_precision, EvalError};
use crate::descriptors::{l2_distance, DescriptorSet};

/// AP of labelled pairs scored by `-distance`.
pub fn verification_ap(distances: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if distances.len() != labels.len() {
        return Err(EvalError::Alignment(format!(
            "{} distances for {} labels",
            distances.len(),
            labels.len()
        )));
    }
    let items: Vec<(f64, bool)> = distances.iter().zip(labels).map(|(&d, &l)| (-d, l)).collect();
    average_precision(&items)
}

/// Verification AP for row-aligned descriptor pairs.
pub fn verification_ap_descriptors(
    left: &DescriptorSet,
    right: &DescriptorSet,
    labels: &[bool],
) -> Result<f64, EvalError> {
    if left.len() != right.len() || left.len() != labels.len() {
        return Err(EvalError::Alignment(format!(
            "{} / {} descriptors for {} labels",
            left.len(),
            right.len(),
            labels.len()
        )));
    }
    check_dims(left, right)?;
    let d: Vec<f64> = (0..left.len())
        .map(|i| l2_distance(left.row(i), right.row(i)))
        .collect();
    verification_ap(&d, labels)
}

fn check_dims(a: &DescriptorSet, b: &DescriptorSet) -> Result<(), EvalError> {
    if !a.is_empty() && !b.is_empty() && a.dim() != b.dim() {
        return Err(EvalError::Alignment(format!(
            "descriptor dimensions differ ({} vs {})",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Index of the nearest row of `pool` (lowest index on ties) and its distance.
pub fn nearest_neighbor(query: &[f32], pool: &DescriptorSet) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, row) in pool.rows().enumerate() {
        let d = l2_distance(query, row);
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((k, d));
        }
    }
    best
}

/// Keypoints of one image: ids and row-aligned descriptors.
#[derive(Debug, Clone, Copy)]
pub struct Keypoints<'a> {
    pub ids: &'a [u64],
    pub descriptors: &'a DescriptorSet,
}

impl<'a> Keypoints<'a> {
    pub fn new(ids: &'a [u64], descriptors: &'a DescriptorSet) -> Result<Self, EvalError> {
        if ids.len() != descriptors.len() {
            return Err(EvalError::Alignment(format!(
                "{} keypoint ids for {} descriptors",
                ids.len(),
                descriptors.len()
            )));
        }
        Ok(Self { ids, descriptors })
    }
}

/// Nearest-neighbor matching from reference to target keypoints.
///
/// Every reference keypoint yields one prediction scored by `-distance`; it is
/// relevant when the ground truth maps the reference id to the predicted
/// target id. A list without any correct prediction scores 0.
pub fn matching_map(
    reference: Keypoints<'_>,
    target: Keypoints<'_>,
    ground_truth: &BTreeMap<u64, u64>,
) -> Result<f64, EvalError> {
    if target.ids.is_empty() {
        return Err(EvalError::EmptyTarget);
    }
    if ground_truth.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    check_dims(reference.descriptors, target.descriptors)?;
    let items: Vec<(f64, bool)> = (0..reference.ids.len())
        .into_par_iter()
        .map(|i| {
            let (k, d) = nearest_neighbor(reference.descriptors.row(i), target.descriptors)
                .expect("target is non-empty");
            let correct = ground_truth.get(&reference.ids[i]) == Some(&target.ids[k]);
            (-d, correct)
        })
        .collect();
    match average_precision(&items) {
        Err(EvalError::NoRelevantItems) => Ok(0.0),
        other => other,
    }
}

/// Queries against a pool of patches, evaluated at several distractor budgets.
#[derive(Debug, Clone)]
pub struct RetrievalTask {
    pub queries: DescriptorSet,
    pub pool: DescriptorSet,
    /// Relevant pool rows per query.
    pub relevant: Vec<BTreeSet<usize>>,
    /// Number of distractors kept per query in each setting. Distractors are
    /// the first non-relevant pool rows in pool order. Empty means one setting
    /// with the whole pool.
    pub distractor_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    /// Equal-weight mean over the distractor settings.
    pub map: f64,
    /// `(distractors, mean AP over queries)` per setting.
    pub per_setting: Vec<(usize, f64)>,
}

pub fn retrieval_map(task: &RetrievalTask) -> Result<RetrievalResult, EvalError> {
    let nq = task.queries.len();
    if task.relevant.len() != nq {
        return Err(EvalError::Alignment(format!(
            "{} relevance sets for {nq} queries",
            task.relevant.len()
        )));
    }
    if nq == 0 {
        return Err(EvalError::NoRelevantItems);
    }
    check_dims(&task.queries, &task.pool)?;
    for (q, rel) in task.relevant.iter().enumerate() {
        if rel.is_empty() {
            return Err(EvalError::Alignment(format!("query {q} has no relevant pool item")));
        }
        if let Some(&bad) = rel.iter().find(|&&r| r >= task.pool.len()) {
            return Err(EvalError::Alignment(format!(
                "query {q} references pool row {bad} of {}",
                task.pool.len()
            )));
        }
    }
    let settings: Vec<usize> = if task.distractor_counts.is_empty() {
        vec![task.pool.len()]
    } else {
        task.distractor_counts.clone()
    };

    // Distances are shared by all settings.
    let distances: Vec<Vec<f64>> = (0..nq)
        .into_par_iter()
        .map(|q| {
            let qrow = task.queries.row(q);
            task.pool.rows().map(|p| l2_distance(qrow, p)).collect()
        })
        .collect();

    let mut per_setting = Vec::with_capacity(settings.len());
    for &n in &settings {
        let mut sum = 0.0;
        for (rel, row) in task.relevant.iter().zip(&distances) {
            let mut distractors = 0usize;
            let mut items = Vec::new();
            for (k, &d) in row.iter().enumerate() {
                if rel.contains(&k) {
                    items.push((-d, true));
                } else if distractors < n {
                    distractors += 1;
                    items.push((-d, false));
                }
            }
            sum += average_precision(&items)?;
        }
        per_setting.push((n, sum / nq as f64));
    }
    let map = per_setting.iter().map(|(_, v)| v).sum::<f64>() / per_setting.len() as f64;
    Ok(RetrievalResult { map, per_setting })
}
