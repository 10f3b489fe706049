mod common;

use common::*;
use nalgebra::{Point3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use psforge::geometry::{angle_between, depth, project, scale_ratio, GeometryError};
use psforge::scene::ImageView;
use psforge_oracle::{oracle_angle, oracle_project};
use rand::Rng;

fn random_rotation(r: &mut rand_chacha::ChaCha8Rng) -> UnitQuaternion<f64> {
    let axis = nalgebra::Unit::new_normalize(unit_vector(r));
    UnitQuaternion::from_axis_angle(&axis, r.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn depth_is_rigid_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = random_rotation(&mut r);
        let c = Point3::from(unit_vector(&mut r) * r.random_range(0.0..20.0));
        let p = Point3::from(unit_vector(&mut r) * r.random_range(0.0..20.0));
        let view = ImageView::from_center(1, 1, q, c, "v");
        let rt = random_rotation(&mut r);
        let t = unit_vector(&mut r) * r.random_range(0.0..50.0);
        let moved = ImageView::from_center(1, 1, q * rt.inverse(), Point3::from(rt * c.coords + t), "v");
        let p2 = Point3::from(rt * p.coords + t);
        prop_assert!((depth(&p, &view) - depth(&p2, &moved)).abs() < 1e-9);
    }

    #[test]
    fn angle_symmetric_and_triangle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, c) = (unit_vector(&mut r), unit_vector(&mut r), unit_vector(&mut r));
        let ab = angle_between(&a, &b).unwrap();
        prop_assert_eq!(ab, angle_between(&b, &a).unwrap());
        prop_assert!((0.0..=180.0).contains(&ab));
        let ac = angle_between(&a, &c).unwrap();
        let cb = angle_between(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
        prop_assert!((ab - oracle_angle(arr(&a), arr(&b))).abs() < 1e-9);
        prop_assert!(angle_between(&a, &a).unwrap() < 1e-5);
    }

    #[test]
    fn scale_ratio_symmetric(f1 in 1.0f64..2000.0, d1 in 0.01f64..100.0, f2 in 1.0f64..2000.0, d2 in 0.01f64..100.0) {
        let s = scale_ratio(f1, d1, f2, d2).unwrap();
        prop_assert!(s >= 1.0);
        prop_assert_eq!(s, scale_ratio(f2, d2, f1, d1).unwrap());
        let rejected = matches!(scale_ratio(f1, -d1, f2, d2), Err(GeometryError::NonPositive { .. }));
        prop_assert!(rejected);
    }

    #[test]
    fn projection_matches_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = random_rotation(&mut r);
        let c = Point3::from(unit_vector(&mut r) * 5.0);
        let view = ImageView::from_center(1, 1, q, c, "v");
        let cam = psforge::scene::CameraIntrinsics {
            camera_id: 1,
            model: psforge::scene::CameraModel::Pinhole,
            fx: r.random_range(100.0..1000.0),
            fy: r.random_range(100.0..1000.0),
            principal_point: nalgebra::Point2::new(320.0, 240.0),
            width: 640,
            height: 480,
        };
        let p = Point3::from(unit_vector(&mut r) * r.random_range(0.0..10.0));
        let m = view.rotation();
        let rot = [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ];
        let expected = oracle_project(rot, arr(&view.translation), (cam.fx, cam.fy, 320.0, 240.0), [p.x, p.y, p.z]);
        match (project(&p, &view, &cam), expected) {
            (Ok(got), Some((x, y))) => prop_assert!((got.x - x).abs() < 1e-6 && (got.y - y).abs() < 1e-6),
            (Err(GeometryError::BehindCamera(_)), None) => {}
            (got, want) => prop_assert!(false, "{got:?} vs {want:?}"),
        }
    }

    #[test]
    fn synthetic_observations_reproject(seed in any::<u64>()) {
        let scene = varied_scene(seed, 20, 6);
        for t in scene.tracks.values() {
            for o in &t.observations {
                let v = &scene.views[&o.image_id];
                let p = project(&t.position, v, scene.camera_of(v)).unwrap();
                prop_assert!((p - o.xy).norm() < 1e-6);
            }
        }
    }
}
