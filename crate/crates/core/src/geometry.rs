//! Projection, depth, scale-ratio and viewpoint-angle kernels.
//!
//! Angles are in degrees throughout.

use nalgebra::{Point2, Point3, Vector3};
use thiserror::Error;

use crate::scene::{CameraIntrinsics, ImageView};

const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("expected a unit vector, got norm {0}")]
    NotUnit(f64),
    #[error("f/d inputs must be positive (f_i={f_i}, d_i={d_i}, f_j={f_j}, d_j={d_j})")]
    NonPositive { f_i: f64, d_i: f64, f_j: f64, d_j: f64 },
    #[error("point is behind the camera (depth {0})")]
    BehindCamera(f64),
}

/// Angle between two unit directions in degrees, in `[0, 180]`.
pub fn angle_between(v_i: &Vector3<f64>, v_j: &Vector3<f64>) -> Result<f64, GeometryError> {
    for v in [v_i, v_j] {
        let n = v.norm();
        if !((n - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(GeometryError::NotUnit(n));
        }
    }
    Ok(v_i.dot(v_j).clamp(-1.0, 1.0).acos().to_degrees())
}

/// Signed distance of `p` from the camera center along the viewing direction.
pub fn depth(p: &Point3<f64>, view: &ImageView) -> f64 {
    view.viewing_direction().dot(&(p - view.center()))
}

/// `max(f_i/d_i, f_j/d_j) / min(f_i/d_i, f_j/d_j)`; always `>= 1`.
pub fn scale_ratio(f_i: f64, d_i: f64, f_j: f64, d_j: f64) -> Result<f64, GeometryError> {
    if !(f_i > 0.0 && d_i > 0.0 && f_j > 0.0 && d_j > 0.0) {
        return Err(GeometryError::NonPositive { f_i, d_i, f_j, d_j });
    }
    Ok(ratio_of(f_i / d_i, f_j / d_j))
}

/// Ratio of two positive magnifications, larger over smaller.
pub(crate) fn ratio_of(a: f64, b: f64) -> f64 {
    if a >= b {
        a / b
    } else {
        b / a
    }
}

/// Pinhole projection of a world point into pixel coordinates.
pub fn project(
    p: &Point3<f64>,
    view: &ImageView,
    cam: &CameraIntrinsics,
) -> Result<Point2<f64>, GeometryError> {
    let pc = view.to_camera(p);
    if !(pc.z > 0.0) {
        return Err(GeometryError::BehindCamera(pc.z));
    }
    Ok(Point2::new(
        cam.fx * pc.x / pc.z + cam.principal_point.x,
        cam.fy * pc.y / pc.z + cam.principal_point.y,
    ))
}

/// Symmetric matrix of pairwise viewpoint angles (degrees) for one track.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl AngleMatrix {
    /// Builds a matrix from explicit entries, checking the invariants.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Option<Self> {
        if entries.len() != n * n {
            return None;
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return None;
            }
            for j in 0..n {
                let a = entries[i * n + j];
                if !(0.0..=180.0).contains(&a) || a != entries[j * n + i] {
                    return None;
                }
            }
        }
        Some(Self { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }
}

/// Pairwise angles between the given viewing directions.
pub fn angle_matrix(directions: &[Vector3<f64>]) -> Result<AngleMatrix, GeometryError> {
    let n = directions.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let a = angle_between(&directions[i], &directions[j])?;
            entries[i * n + j] = a;
            entries[j * n + i] = a;
        }
    }
    Ok(AngleMatrix { n, entries })
}

/// Angle matrix for the views observing one track, in observation order.
pub fn angle_matrix_for_views(views: &[&ImageView]) -> AngleMatrix {
    let dirs: Vec<_> = views.iter().map(|v| v.viewing_direction()).collect();
    angle_matrix(&dirs).expect("viewing directions are unit length")
}
