mod common;

use common::*;
use nalgebra::Vector3;
use proptest::prelude::*;
use psforge::scene::{parse_scene, read_scene_dir, write_scene, write_scene_dir, SceneError, SceneModel};
use psforge::synth::{generate_scene, SynthConfig};
use rand::Rng;

fn assert_close(a: &SceneModel, b: &SceneModel, tol: f64) {
    assert_eq!(a.cameras, b.cameras);
    assert_eq!(a.views.len(), b.views.len());
    for (va, vb) in a.views.values().zip(b.views.values()) {
        assert_eq!((va.image_id, va.camera_id, &va.name), (vb.image_id, vb.camera_id, &vb.name));
        assert!((va.rotation() - vb.rotation()).abs().max() < tol);
        assert!((va.translation - vb.translation).abs().max() < tol);
        assert_eq!(va.keypoints, vb.keypoints);
    }
    assert_eq!(a.tracks, b.tracks);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn write_parse_round_trip(seed in any::<u64>(), points in 1usize..60, cameras in 1usize..12, jitter in 0.0f64..1.0) {
        let scene = generate_scene(&SynthConfig {
            n_points: points,
            n_cameras: cameras,
            elevation_jitter_deg: 30.0,
            observe_prob: 0.9,
            jitter_px: jitter,
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let text = write_scene(&scene).unwrap();
        let parsed = parse_scene(&text.cameras, &text.images, &text.points).unwrap();
        assert_close(&scene, &parsed, 1e-9);
        // The writer is a fixed point after one round.
        prop_assert_eq!(write_scene(&parsed).unwrap(), text);
    }

    #[test]
    fn viewing_direction_is_rotated_z(seed in any::<u64>()) {
        let scene = varied_scene(seed, 5, 6);
        let text = write_scene(&scene).unwrap();
        let parsed = parse_scene(&text.cameras, &text.images, &text.points).unwrap();
        for v in parsed.views.values() {
            let d = v.viewing_direction();
            prop_assert!((d.norm() - 1.0).abs() < 1e-12);
            let expected = v.orientation.inverse() * Vector3::z();
            prop_assert!((d - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn corrupted_references_are_rejected(seed in any::<u64>(), kind in 0usize..6) {
        let mut scene = varied_scene(seed, 12, 5);
        let mut r = rng(seed ^ 0x5eed);
        let track_ids: Vec<u64> = scene.tracks.keys().copied().collect();
        let tid = track_ids[r.random_range(0..track_ids.len())];
        let obs = scene.tracks[&tid].observations[0].clone();
        match kind {
            0 => {
                let cam = scene.views[&obs.image_id].camera_id;
                scene.cameras.remove(&cam);
            }
            1 => {
                scene.views.remove(&obs.image_id);
            }
            2 => {
                scene.tracks.remove(&tid);
            }
            3 => {
                scene.tracks.get_mut(&tid).unwrap().observations[0].keypoint_idx = 10_000;
            }
            4 => {
                let kp = &mut scene.views.get_mut(&obs.image_id).unwrap().keypoints[obs.keypoint_idx];
                kp.point_id = Some(999_999);
            }
            _ => {
                scene.views.get_mut(&obs.image_id).unwrap().camera_id = 4242;
            }
        }
        prop_assert!(matches!(scene.validate(), Err(SceneError::Integrity(_))));
        prop_assert!(write_scene(&scene).is_err());
    }

    #[test]
    fn parser_never_panics(cameras in ".{0,200}", images in ".{0,300}", points in ".{0,200}") {
        let _ = parse_scene(&cameras, &images, &points);
    }
}

#[test]
fn directory_round_trip() {
    let scene = varied_scene(3, 30, 6);
    let dir = tempfile::tempdir().unwrap();
    write_scene_dir(&scene, dir.path()).unwrap();
    let back = read_scene_dir(dir.path()).unwrap();
    assert_close(&scene, &back, 1e-9);
    assert!(matches!(
        read_scene_dir(&dir.path().join("missing")),
        Err(SceneError::Io { .. })
    ));
}

#[test]
fn plain_colmap_triples_parse() {
    let cameras = "# Camera list\n1 PINHOLE 100 80 50 52 50 40\n";
    let images = "# Image list\n\
        1 1 0 0 0 0 0 0 1 a.png\n\
        10 20 7 30 40 -1\n\
        2 1 0 0 0 1 0 0 1 b.png\n\
        12 22 7\n";
    let points = "7 0 0 5 255 0 0 0.5 1 0 2 0\n";
    let s = parse_scene(cameras, images, points).unwrap();
    let kp = &s.views[&1].keypoints;
    assert_eq!(kp.len(), 2);
    assert_eq!(kp[0].scale, 1.6);
    assert_eq!(kp[0].orientation_rad, 0.0);
    assert_eq!(kp[1].point_id, None);
    assert_eq!(s.tracks[&7].observations.len(), 2);
    assert_eq!(s.cameras[&1].focal_px(), 51.0);
}
