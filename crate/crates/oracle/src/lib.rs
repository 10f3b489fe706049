//! Brute-force reference implementations used as test oracles.
//!
//! Everything here works on plain slices and nested vectors and shares no
//! code with the production crate. Each function is a direct transcription of
//! the rule it checks, with no caching and no early exits beyond the rule's own.

#![allow(clippy::needless_range_loop)]

/// Thresholds as `(sc_th, min_v_th, max_v_th, scale_jump)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub sc_th: f64,
    pub min_v_th: f64,
    pub max_v_th: f64,
    pub scale_jump: f64,
}

fn scale_ratio(focal: &[f64], depth: &[f64], a: usize, b: usize) -> f64 {
    let ma = focal[a] / depth[a];
    let mb = focal[b] / depth[b];
    if ma > mb {
        ma / mb
    } else {
        mb / ma
    }
}

/// Greedy matching set for patch `i`. Returns the members in insertion order,
/// starting with `i`.
///
/// Every iteration recomputes, for each remaining candidate `j`, the minimum
/// angle to the current members and the member realizing it (lowest index on
/// ties), then picks the candidate with the largest such angle (lowest index
/// on ties).
pub fn oracle_match_set(
    i: usize,
    focal: &[f64],
    depth: &[f64],
    angles: &[Vec<f64>],
    th: Thresholds,
) -> Vec<usize> {
    let n = angles.len();
    let mut members = vec![i];
    loop {
        let mut best_j: Option<usize> = None;
        let mut best_mvd = f64::NEG_INFINITY;
        let mut best_r = i;
        for j in (i + 1)..n {
            if angles[i][j] > th.max_v_th || members.contains(&j) {
                continue;
            }
            let mut mvd = f64::INFINITY;
            let mut r = usize::MAX;
            let mut sorted = members.clone();
            sorted.sort_unstable();
            for &h in &sorted {
                if angles[h][j] < mvd {
                    mvd = angles[h][j];
                    r = h;
                }
            }
            if best_j.is_none() || mvd > best_mvd {
                best_j = Some(j);
                best_mvd = mvd;
                best_r = r;
            }
        }
        let Some(j) = best_j else {
            return members;
        };
        let s_ij = scale_ratio(focal, depth, i, j);
        let s_rj = scale_ratio(focal, depth, best_r, j);
        let diverse = best_mvd >= th.min_v_th || s_rj > th.scale_jump;
        if diverse && s_ij < th.sc_th {
            members.push(j);
        } else {
            return members;
        }
    }
}

/// All `(i, j)` pairs produced by the matching sets of every patch of a track.
pub fn oracle_track_pairs(
    focal: &[f64],
    depth: &[f64],
    angles: &[Vec<f64>],
    th: Thresholds,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..angles.len() {
        let set = oracle_match_set(i, focal, depth, angles, th);
        for &j in &set[1..] {
            out.push((i, j));
        }
    }
    out
}

/// Angle in degrees between two unit vectors.
pub fn oracle_angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    dot.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Mean over rows with at least one valid negative of
/// `max(0, margin + d[i][i] - min(d[i][j] over avp, d[k][i] over pva))`.
pub fn oracle_loss(d: &[Vec<f64>], avp: &[Vec<bool>], pva: &[Vec<bool>], margin: f64) -> f64 {
    let m = d.len();
    let mut sum = 0.0;
    let mut rows = 0usize;
    for i in 0..m {
        let mut hardest = f64::INFINITY;
        let mut any = false;
        for j in 0..m {
            if avp[i][j] {
                any = true;
                if d[i][j] < hardest {
                    hardest = d[i][j];
                }
            }
        }
        for k in 0..m {
            if pva[i][k] {
                any = true;
                if d[k][i] < hardest {
                    hardest = d[k][i];
                }
            }
        }
        if any {
            let term = margin + d[i][i] - hardest;
            sum += if term > 0.0 { term } else { 0.0 };
            rows += 1;
        }
    }
    if rows == 0 {
        0.0
    } else {
        sum / rows as f64
    }
}

/// Average precision by explicit counting: for each relevant item, the
/// fraction of items ranked at or above it that are relevant. Rank is by
/// descending score; equal scores rank by input position.
pub fn oracle_average_precision(scores: &[f64], relevant: &[bool]) -> Option<f64> {
    let n = scores.len();
    let total = relevant.iter().filter(|&&r| r).count();
    if total == 0 {
        return None;
    }
    let above = |a: usize, b: usize| scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    let mut sum = 0.0;
    for k in 0..n {
        if !relevant[k] {
            continue;
        }
        let mut ranked_at_or_above = 1usize;
        let mut relevant_at_or_above = 1usize;
        for q in 0..n {
            if q != k && above(q, k) {
                ranked_at_or_above += 1;
                if relevant[q] {
                    relevant_at_or_above += 1;
                }
            }
        }
        sum += relevant_at_or_above as f64 / ranked_at_or_above as f64;
    }
    Some(sum / total as f64)
}

/// Projects a world point through a world-to-camera rotation (row-major),
/// translation and pinhole intrinsics `(fx, fy, cx, cy)`.
pub fn oracle_project(
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    intrinsics: (f64, f64, f64, f64),
    p: [f64; 3],
) -> Option<(f64, f64)> {
    let mut c = [0.0; 3];
    for r in 0..3 {
        c[r] = rotation[r][0] * p[0] + rotation[r][1] * p[1] + rotation[r][2] * p[2] + translation[r];
    }
    if c[2] <= 0.0 {
        return None;
    }
    let (fx, fy, cx, cy) = intrinsics;
    Some((fx * c[0] / c[2] + cx, fy * c[1] / c[2] + cy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(deg: &[f64]) -> Vec<Vec<f64>> {
        deg.iter()
            .map(|a| deg.iter().map(|b| (a - b).abs()).collect())
            .collect()
    }

    #[test]
    fn four_camera_trace() {
        let th = Thresholds {
            sc_th: 2.5,
            min_v_th: 25.0,
            max_v_th: 100.0,
            scale_jump: 1.5,
        };
        let a = ring(&[0.0, 10.0, 30.0, 60.0]);
        let ones = vec![1.0; 4];
        assert_eq!(oracle_match_set(0, &ones, &ones, &a, th), vec![0, 3, 2]);
        assert_eq!(oracle_match_set(0, &[1.0], &[1.0], &[vec![0.0]], th), vec![0]);
    }

    #[test]
    fn loss_fixtures() {
        let d = vec![vec![0.2, 0.3], vec![0.35, 0.1]];
        let full = vec![vec![false, true], vec![true, false]];
        assert!((oracle_loss(&d, &full, &full, 1.0) - 0.85).abs() < 1e-12);
        let none = vec![vec![false; 2]; 2];
        assert_eq!(oracle_loss(&d, &none, &none, 1.0), 0.0);
    }

    #[test]
    fn ap_fixture() {
        let ap = oracle_average_precision(&[3.0, 2.0, 1.0], &[true, false, true]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
        assert!(oracle_average_precision(&[1.0], &[false]).is_none());
    }
}
