#![allow(dead_code)]

use nalgebra::Vector3;
use psforge::geometry::AngleMatrix;
use psforge::sampler::{SamplingThresholds, TrackGeometry};
use psforge::scene::SceneModel;
use psforge::synth::{generate_scene, SynthConfig};
use psforge_oracle::Thresholds;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Directions within `spread_deg` of +z, with focal lengths and depths that
/// give scale ratios on both sides of the usual thresholds.
pub fn random_track(rng: &mut ChaCha8Rng, n: usize, spread_deg: f64) -> TrackGeometry {
    let mut dirs = Vec::with_capacity(n);
    while dirs.len() < n {
        let v = unit_vector(rng);
        if v.z.acos().to_degrees() <= spread_deg {
            dirs.push(v);
        }
    }
    let focal = (0..n).map(|_| rng.random_range(300.0..900.0)).collect();
    let depth = (0..n).map(|_| rng.random_range(2.0..10.0)).collect();
    TrackGeometry::from_directions(focal, depth, &dirs).unwrap()
}

/// Thresholds drawn around the defaults, always valid.
pub fn random_thresholds(rng: &mut ChaCha8Rng) -> SamplingThresholds {
    let min_v_th = rng.random_range(0.0..60.0);
    SamplingThresholds {
        sc_th: rng.random_range(1.1..4.0),
        min_v_th,
        max_v_th: rng.random_range(min_v_th..180.0),
        scale_jump: rng.random_range(1.05..3.0),
    }
}

pub fn plain_angles(a: &AngleMatrix) -> Vec<Vec<f64>> {
    (0..a.len()).map(|i| a.row(i).to_vec()).collect()
}

pub fn oracle_thresholds(th: &SamplingThresholds) -> Thresholds {
    Thresholds {
        sc_th: th.sc_th,
        min_v_th: th.min_v_th,
        max_v_th: th.max_v_th,
        scale_jump: th.scale_jump,
    }
}

/// A synthetic scene with cameras spread in elevation and partial visibility.
pub fn varied_scene(seed: u64, n_points: usize, n_cameras: usize) -> SceneModel {
    generate_scene(&SynthConfig {
        n_points,
        n_cameras,
        elevation_jitter_deg: 40.0,
        observe_prob: 0.8,
        focal_range: (150.0, 400.0),
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}
