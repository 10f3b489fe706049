mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use nalgebra::Point2;
use proptest::prelude::*;
use psforge::descriptors::DescriptorSet;
use psforge::evaluation::{
    average_precision, matching_map, retrieval_map, strecha_protocol, transfer_point, EvalError, Keypoints,
    RetrievalTask, StrechaConfig, TRANSFER_RADIUS_PX,
};
use psforge::geometry::project;
use psforge::synth::{generate_scene, SynthConfig};
use psforge_oracle::{oracle_average_precision, oracle_project};
use rand::Rng;

fn random_set(r: &mut rand_chacha::ChaCha8Rng, n: usize, dim: usize) -> DescriptorSet {
    let rows: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..dim).map(|_| r.random_range(-1.0f32..1.0)).collect())
        .collect();
    DescriptorSet::from_rows(&rows).unwrap()
}

fn brute_l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn ap_matches_oracle(seed in any::<u64>(), n in 1usize..60, levels in 1u32..20) {
        let mut r = rng(seed);
        // Few score levels to exercise ties.
        let items: Vec<(f64, bool)> = (0..n)
            .map(|_| (r.random_range(0..levels) as f64, r.random_bool(0.3)))
            .collect();
        let scores: Vec<f64> = items.iter().map(|i| i.0).collect();
        let rel: Vec<bool> = items.iter().map(|i| i.1).collect();
        match (average_precision(&items), oracle_average_precision(&scores, &rel)) {
            (Ok(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (Err(EvalError::NoRelevantItems), None) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn ap_invariant_under_monotone_maps(seed in any::<u64>(), n in 1usize..80) {
        let mut r = rng(seed);
        let mut items: Vec<(f64, bool)> = (0..n).map(|_| (r.random_range(-5.0..5.0), r.random_bool(0.4))).collect();
        items[0].1 = true;
        let base = average_precision(&items).unwrap();
        let mapped: Vec<(f64, bool)> = items.iter().map(|&(s, l)| (3.0 * s.exp() + 7.0, l)).collect();
        prop_assert!((average_precision(&mapped).unwrap() - base).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn ap_is_one_iff_relevant_first(seed in any::<u64>(), n in 1usize..40) {
        let mut r = rng(seed);
        let mut rel: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        rel[0] = true;
        // Distinct descending scores: rank equals position.
        let items: Vec<(f64, bool)> = rel.iter().enumerate().map(|(k, &l)| (-(k as f64), l)).collect();
        let first_irrelevant = rel.iter().position(|&l| !l).unwrap_or(n);
        let all_first = rel[first_irrelevant..].iter().all(|&l| !l);
        prop_assert_eq!(average_precision(&items).unwrap() == 1.0, all_first);
    }

    #[test]
    fn matching_map_matches_brute_force(seed in any::<u64>(), n_ref in 1usize..60, n_tgt in 1usize..60, dim in 1usize..8) {
        let mut r = rng(seed);
        let ref_set = random_set(&mut r, n_ref, dim);
        let tgt_set = random_set(&mut r, n_tgt, dim);
        let ref_ids: Vec<u64> = (0..n_ref as u64).collect();
        let tgt_ids: Vec<u64> = (0..n_tgt as u64).map(|k| 1000 + k).collect();
        let mut gt = BTreeMap::new();
        for &id in &ref_ids {
            if r.random_bool(0.7) {
                gt.insert(id, 1000 + r.random_range(0..n_tgt as u64));
            }
        }
        prop_assume!(!gt.is_empty());
        let got = matching_map(
            Keypoints::new(&ref_ids, &ref_set).unwrap(),
            Keypoints::new(&tgt_ids, &tgt_set).unwrap(),
            &gt,
        ).unwrap();

        let mut scores = Vec::new();
        let mut correct = Vec::new();
        for (i, rid) in ref_ids.iter().enumerate() {
            let mut best = (0usize, f64::INFINITY);
            for k in 0..n_tgt {
                let d = brute_l2(ref_set.row(i), tgt_set.row(k));
                if d < best.1 {
                    best = (k, d);
                }
            }
            scores.push(-best.1);
            correct.push(gt.get(rid) == Some(&tgt_ids[best.0]));
        }
        let expected = oracle_average_precision(&scores, &correct).unwrap_or(0.0);
        prop_assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn more_distractors_never_raise_map(seed in any::<u64>(), nq in 1usize..10, pool in 2usize..80) {
        let mut r = rng(seed);
        let queries = random_set(&mut r, nq, 4);
        let pool_set = random_set(&mut r, pool, 4);
        let relevant: Vec<BTreeSet<usize>> = (0..nq)
            .map(|_| BTreeSet::from([r.random_range(0..pool)]))
            .collect();
        let counts: Vec<usize> = (0..8).map(|k| 1usize << k).collect();
        let res = retrieval_map(&RetrievalTask {
            queries,
            pool: pool_set,
            relevant,
            distractor_counts: counts,
        }).unwrap();
        for w in res.per_setting.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 + 1e-12);
        }
    }
}

#[test]
fn doubling_distractors_lowers_map() {
    let mut r = rng(3);
    let queries = random_set(&mut r, 50, 8);
    let pool = random_set(&mut r, 2000, 8);
    let relevant: Vec<BTreeSet<usize>> = (0..50).map(|q| BTreeSet::from([q])).collect();
    let res = retrieval_map(&RetrievalTask {
        queries,
        pool,
        relevant,
        distractor_counts: vec![100, 200, 400, 800],
    })
    .unwrap();
    for w in res.per_setting.windows(2) {
        assert!(w[1].1 < w[0].1, "{:?}", res.per_setting);
    }
}

#[test]
fn transfer_is_exact_and_radius_bounded() {
    let mut r = rng(12);
    for seed in 0..200u64 {
        let scene = generate_scene(&SynthConfig {
            n_points: 1,
            n_cameras: 6,
            elevation_jitter_deg: 30.0,
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let track = scene.tracks.values().next().unwrap();
        let reference = track.observations[0].image_id;
        let rv = &scene.views[&reference];
        let p_r = project(&track.position, rv, scene.camera_of(rv)).unwrap();
        for o in &track.observations[1..] {
            let v = &scene.views[&o.image_id];
            let m = v.rotation();
            let rot = [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ];
            let cam = scene.camera_of(v);
            let (x, y) = oracle_project(
                rot,
                [v.translation.x, v.translation.y, v.translation.z],
                (cam.fx, cam.fy, cam.principal_point.x, cam.principal_point.y),
                [track.position.x, track.position.y, track.position.z],
            )
            .unwrap();
            let got = transfer_point(&p_r, reference, o.image_id, &scene, TRANSFER_RADIUS_PX).unwrap();
            assert!((got.x - x).abs() < 1e-6 && (got.y - y).abs() < 1e-6);

            let angle: f64 = r.random_range(0.0..std::f64::consts::TAU);
            let off = Point2::new(p_r.x + 3.1 * angle.cos(), p_r.y + 3.1 * angle.sin());
            assert_eq!(transfer_point(&off, reference, o.image_id, &scene, TRANSFER_RADIUS_PX), None);
            let near = Point2::new(p_r.x + 2.9 * angle.cos(), p_r.y + 2.9 * angle.sin());
            assert!(transfer_point(&near, reference, o.image_id, &scene, TRANSFER_RADIUS_PX).is_some());
        }
    }
}

#[test]
fn perfect_descriptors_score_one() {
    let scene = varied_scene(31, 150, 10);
    let source = *scene.views.keys().next().unwrap();
    let sv = &scene.views[&source];
    let keypoints: Vec<Point2<f64>> = scene
        .tracks
        .values()
        .filter(|t| t.observation_in(source).is_some())
        .map(|t| project(&t.position, sv, scene.camera_of(sv)).unwrap())
        .collect();
    let mut r = rng(2);
    let per_keypoint = random_set(&mut r, keypoints.len(), 16);
    let descriptors: BTreeMap<psforge::scene::ImageId, DescriptorSet> =
        scene.views.keys().map(|&id| (id, per_keypoint.clone())).collect();
    let report = strecha_protocol(&scene, &keypoints, &descriptors, &StrechaConfig::new(source, source)).unwrap();
    assert!(!report.pairs.is_empty());
    assert!(report.pairs.iter().all(|p| p.map == 1.0));
    assert_eq!(report.map, 1.0);
}
