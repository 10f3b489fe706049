//! COLMAP sparse text model (`cameras.txt`, `images.txt`, `points3D.txt`).
//!
//! Keypoint lines in `images.txt` are normally `X Y POINT3D_ID` triples. When
//! the file header declares `POINTS2D[] as (X, Y, SCALE, ORIENTATION, POINT3D_ID)`
//! the keypoints are read as 5-tuples carrying the detector scale and
//! orientation. Plain triples get [`DEFAULT_KEYPOINT_SCALE`] and orientation 0.
//! The writer always emits the extended layout.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Point2, Point3, Quaternion, UnitQuaternion, Vector3};

use super::{
    CameraIntrinsics, CameraModel, ImageView, Keypoint, Observation, SceneError, SceneFile,
    SceneModel, Track,
};

/// Scale assigned to keypoints read from plain COLMAP triples.
pub const DEFAULT_KEYPOINT_SCALE: f64 = 1.6;

const EXTENDED_POINTS2D_HEADER: &str = "POINTS2D[] as (X, Y, SCALE, ORIENTATION, POINT3D_ID)";

/// The three text files of a sparse model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneText {
    pub cameras: String,
    pub images: String,
    pub points: String,
}

struct Fields<'a> {
    file: SceneFile,
    line: usize,
    tokens: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn new(file: SceneFile, line: usize, text: &'a str) -> Self {
        Self {
            file,
            line,
            tokens: text.split_whitespace(),
        }
    }

    fn err(&self, message: impl Into<String>) -> SceneError {
        SceneError::Parse {
            file: self.file,
            line: self.line,
            message: message.into(),
        }
    }

    fn next_str(&mut self, what: &str) -> Result<&'a str, SceneError> {
        self.tokens
            .next()
            .ok_or_else(|| self.err(format!("missing {what}")))
    }

    fn next<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, SceneError> {
        let tok = self.next_str(what)?;
        tok.parse()
            .map_err(|_| self.err(format!("invalid {what} `{tok}`")))
    }

    fn next_f64(&mut self, what: &str) -> Result<f64, SceneError> {
        let v: f64 = self.next(what)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(format!("non-finite {what}")))
        }
    }

    fn finish(mut self) -> Result<(), SceneError> {
        match self.tokens.next() {
            None => Ok(()),
            Some(tok) => Err(self.err(format!("unexpected trailing token `{tok}`"))),
        }
    }
}

fn is_comment(line: &str) -> bool {
    line.trim_start().starts_with('#')
}

fn parse_cameras(text: &str, scene: &mut SceneModel) -> Result<(), SceneError> {
    for (idx, line) in text.lines().enumerate() {
        if is_comment(line) || line.trim().is_empty() {
            continue;
        }
        let mut f = Fields::new(SceneFile::Cameras, idx + 1, line);
        let camera_id: u32 = f.next("CAMERA_ID")?;
        let model = match f.next_str("MODEL")? {
            "SIMPLE_PINHOLE" => CameraModel::SimplePinhole,
            "PINHOLE" => CameraModel::Pinhole,
            other => return Err(f.err(format!("unsupported camera model `{other}`"))),
        };
        let width: u32 = f.next("WIDTH")?;
        let height: u32 = f.next("HEIGHT")?;
        let (fx, fy) = match model {
            CameraModel::SimplePinhole => {
                let f0 = f.next_f64("focal length")?;
                (f0, f0)
            }
            CameraModel::Pinhole => (f.next_f64("fx")?, f.next_f64("fy")?),
        };
        let cx = f.next_f64("cx")?;
        let cy = f.next_f64("cy")?;
        let line_no = f.line;
        f.finish()?;
        let cam = CameraIntrinsics {
            camera_id,
            model,
            fx,
            fy,
            principal_point: Point2::new(cx, cy),
            width,
            height,
        };
        if scene.cameras.insert(camera_id, cam).is_some() {
            return Err(SceneError::Parse {
                file: SceneFile::Cameras,
                line: line_no,
                message: format!("duplicate camera id {camera_id}"),
            });
        }
    }
    Ok(())
}

fn parse_keypoints(
    line_no: usize,
    line: &str,
    extended: bool,
) -> Result<Vec<Keypoint>, SceneError> {
    let mut f = Fields::new(SceneFile::Images, line_no, line);
    let mut keypoints = Vec::new();
    while let Some(first) = f.tokens.next() {
        let x: f64 = first
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| f.err(format!("invalid keypoint X `{first}`")))?;
        let y = f.next_f64("keypoint Y")?;
        let (scale, orientation_rad) = if extended {
            (f.next_f64("keypoint SCALE")?, f.next_f64("keypoint ORIENTATION")?)
        } else {
            (DEFAULT_KEYPOINT_SCALE, 0.0)
        };
        let pid: i64 = f.next("POINT3D_ID")?;
        let point_id = match pid {
            -1 => None,
            p if p >= 0 => Some(p as u64),
            p => return Err(f.err(format!("invalid POINT3D_ID {p}"))),
        };
        keypoints.push(Keypoint {
            xy: Point2::new(x, y),
            scale,
            orientation_rad,
            point_id,
        });
    }
    Ok(keypoints)
}

fn parse_images(text: &str, scene: &mut SceneModel) -> Result<(), SceneError> {
    let mut extended = false;
    let mut pending: Option<ImageView> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if is_comment(line) {
            if line.contains("POINTS2D[]") && line.contains("SCALE") {
                extended = true;
            }
            continue;
        }
        match pending.take() {
            Some(mut view) => {
                view.keypoints = parse_keypoints(line_no, line, extended)?;
                insert_view(scene, view, line_no)?;
            }
            None => {
                if line.trim().is_empty() {
                    continue;
                }
                let mut f = Fields::new(SceneFile::Images, line_no, line);
                let image_id: u32 = f.next("IMAGE_ID")?;
                let qw = f.next_f64("QW")?;
                let qx = f.next_f64("QX")?;
                let qy = f.next_f64("QY")?;
                let qz = f.next_f64("QZ")?;
                let tx = f.next_f64("TX")?;
                let ty = f.next_f64("TY")?;
                let tz = f.next_f64("TZ")?;
                let camera_id: u32 = f.next("CAMERA_ID")?;
                let name = f.next_str("NAME")?;
                f.finish()?;
                let q = Quaternion::new(qw, qx, qy, qz);
                let norm = q.norm();
                if !(norm > 1e-12) || !norm.is_finite() {
                    return Err(SceneError::Integrity(format!(
                        "image {image_id} (line {line_no}): quaternion has zero norm"
                    )));
                }
                // Already-unit quaternions are kept bit-exact so that
                // write -> parse -> write is a fixed point.
                let orientation = if (norm - 1.0).abs() <= 8.0 * f64::EPSILON {
                    UnitQuaternion::new_unchecked(q)
                } else {
                    UnitQuaternion::from_quaternion(q)
                };
                pending = Some(ImageView::new(
                    image_id,
                    camera_id,
                    orientation,
                    Vector3::new(tx, ty, tz),
                    name,
                ));
            }
        }
    }
    // A final image line without a keypoint line has no keypoints.
    if let Some(view) = pending {
        let last = text.lines().count();
        insert_view(scene, view, last)?;
    }
    Ok(())
}

fn insert_view(scene: &mut SceneModel, view: ImageView, line_no: usize) -> Result<(), SceneError> {
    let id = view.image_id;
    if scene.views.insert(id, view).is_some() {
        return Err(SceneError::Parse {
            file: SceneFile::Images,
            line: line_no,
            message: format!("duplicate image id {id}"),
        });
    }
    Ok(())
}

fn parse_points(text: &str, scene: &mut SceneModel) -> Result<(), SceneError> {
    for (idx, line) in text.lines().enumerate() {
        if is_comment(line) || line.trim().is_empty() {
            continue;
        }
        let mut f = Fields::new(SceneFile::Points, idx + 1, line);
        let point_id: u64 = f.next("POINT3D_ID")?;
        let x = f.next_f64("X")?;
        let y = f.next_f64("Y")?;
        let z = f.next_f64("Z")?;
        let color = [f.next("R")?, f.next("G")?, f.next("B")?];
        let error = f.next_f64("ERROR")?;
        let mut observations = Vec::new();
        while let Some(tok) = f.tokens.next() {
            let image_id: u32 = tok
                .parse()
                .map_err(|_| f.err(format!("invalid track IMAGE_ID `{tok}`")))?;
            let keypoint_idx: usize = f.next("track POINT2D_IDX")?;
            let kp = scene
                .views
                .get(&image_id)
                .and_then(|v| v.keypoints.get(keypoint_idx))
                .ok_or_else(|| {
                    SceneError::Integrity(format!(
                        "point {point_id} (line {}): track entry ({image_id}, {keypoint_idx}) has no keypoint",
                        idx + 1
                    ))
                })?;
            observations.push(Observation {
                image_id,
                keypoint_idx,
                xy: kp.xy,
                scale: kp.scale,
                orientation_rad: kp.orientation_rad,
            });
        }
        let track = Track {
            point_id,
            position: Point3::new(x, y, z),
            color,
            error,
            observations,
        };
        if scene.tracks.insert(point_id, track).is_some() {
            return Err(f.err(format!("duplicate point id {point_id}")));
        }
    }
    Ok(())
}

/// Parses and validates a COLMAP text model.
pub fn parse_scene(
    cameras_text: &str,
    images_text: &str,
    points_text: &str,
) -> Result<SceneModel, SceneError> {
    let mut scene = SceneModel::default();
    parse_cameras(cameras_text, &mut scene)?;
    parse_images(images_text, &mut scene)?;
    parse_points(points_text, &mut scene)?;
    scene.validate()?;
    Ok(scene)
}

/// Serializes a valid scene. Floats use the shortest representation that
/// round-trips exactly.
pub fn write_scene(scene: &SceneModel) -> Result<SceneText, SceneError> {
    scene.validate()?;

    let mut cameras = String::new();
    cameras.push_str("# Camera list with one line of data per camera:\n");
    cameras.push_str("#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    let _ = writeln!(cameras, "# Number of cameras: {}", scene.cameras.len());
    for cam in scene.cameras.values() {
        let _ = write!(
            cameras,
            "{} {} {} {}",
            cam.camera_id,
            cam.model.colmap_name(),
            cam.width,
            cam.height
        );
        match cam.model {
            CameraModel::SimplePinhole => {
                let _ = write!(cameras, " {}", cam.fx);
            }
            CameraModel::Pinhole => {
                let _ = write!(cameras, " {} {}", cam.fx, cam.fy);
            }
        }
        let _ = writeln!(
            cameras,
            " {} {}",
            cam.principal_point.x, cam.principal_point.y
        );
    }

    let mut images = String::new();
    images.push_str("# Image list with two lines of data per image:\n");
    images.push_str("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n");
    let _ = writeln!(images, "#   {EXTENDED_POINTS2D_HEADER}");
    let _ = writeln!(images, "# Number of images: {}", scene.views.len());
    for view in scene.views.values() {
        let q = view.orientation.quaternion();
        let t = &view.translation;
        let _ = writeln!(
            images,
            "{} {} {} {} {} {} {} {} {} {}",
            view.image_id, q.w, q.i, q.j, q.k, t.x, t.y, t.z, view.camera_id, view.name
        );
        let mut first = true;
        for kp in &view.keypoints {
            if !first {
                images.push(' ');
            }
            first = false;
            let pid = kp.point_id.map_or(-1i128, |p| p as i128);
            let _ = write!(
                images,
                "{} {} {} {} {}",
                kp.xy.x, kp.xy.y, kp.scale, kp.orientation_rad, pid
            );
        }
        images.push('\n');
    }

    let mut points = String::new();
    points.push_str("# 3D point list with one line of data per point:\n");
    points.push_str("#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
    let _ = writeln!(points, "# Number of points: {}", scene.tracks.len());
    for track in scene.tracks.values() {
        let p = &track.position;
        let _ = write!(
            points,
            "{} {} {} {} {} {} {} {}",
            track.point_id, p.x, p.y, p.z, track.color[0], track.color[1], track.color[2], track.error
        );
        for obs in &track.observations {
            let _ = write!(points, " {} {}", obs.image_id, obs.keypoint_idx);
        }
        points.push('\n');
    }

    Ok(SceneText {
        cameras,
        images,
        points,
    })
}

fn read_file(path: &Path) -> Result<String, SceneError> {
    fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads `cameras.txt`, `images.txt` and `points3D.txt` from a directory.
pub fn read_scene_dir(dir: &Path) -> Result<SceneModel, SceneError> {
    let cameras = read_file(&dir.join("cameras.txt"))?;
    let images = read_file(&dir.join("images.txt"))?;
    let points = read_file(&dir.join("points3D.txt"))?;
    parse_scene(&cameras, &images, &points)
}

pub fn write_scene_dir(scene: &SceneModel, dir: &Path) -> Result<(), SceneError> {
    let text = write_scene(scene)?;
    let io = |path: &Path, source| SceneError::Io {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for (name, body) in [
        ("cameras.txt", &text.cameras),
        ("images.txt", &text.images),
        ("points3D.txt", &text.points),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAMERAS: &str = "# comment\n1 PINHOLE 100 80 50 60 50 40\n";
    const IDENTITY_IMAGE: &str = "1 1 0 0 0 0 0 0 1 a.ppm\n\n";

    #[test]
    fn identity_pose_looks_down_z() {
        let scene = parse_scene(CAMERAS, IDENTITY_IMAGE, "").unwrap();
        assert_eq!(scene.views.len(), 1);
        assert!(scene.tracks.is_empty());
        let v = scene.views[&1].viewing_direction();
        assert!((v - Vector3::z()).norm() < 1e-15);
        assert_eq!(scene.cameras[&1].focal_px(), 55.0);
    }

    #[test]
    fn zero_quaternion_is_an_integrity_error() {
        let err = parse_scene(CAMERAS, "1 0 0 0 0 0 0 0 1 a.ppm\n\n", "").unwrap_err();
        assert!(matches!(err, SceneError::Integrity(_)), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_scene("# c\n# c\n1 PINHOLE 100 x 1 1 1 1\n", "", "").unwrap_err();
        match err {
            SceneError::Parse { file, line, .. } => {
                assert_eq!(file, SceneFile::Cameras);
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unsupported_model_is_rejected() {
        let err = parse_scene("1 OPENCV 100 80 50 50 50 40 0 0 0 0\n", "", "").unwrap_err();
        assert!(matches!(err, SceneError::Parse { line: 1, .. }));
    }

    #[test]
    fn dangling_camera_reference_is_rejected() {
        let err = parse_scene(CAMERAS, "1 1 0 0 0 0 0 0 7 a.ppm\n\n", "").unwrap_err();
        assert!(matches!(err, SceneError::Integrity(_)));
    }

    #[test]
    fn track_entry_without_keypoint_is_rejected() {
        let images = "1 1 0 0 0 0 0 0 1 a.ppm\n10 20 5\n";
        let points = "5 0 0 1 0 0 0 0.1 1 3\n";
        let err = parse_scene(CAMERAS, images, points).unwrap_err();
        assert!(matches!(err, SceneError::Integrity(_)));
    }

    #[test]
    fn plain_triples_get_default_scale() {
        let images = "1 1 0 0 0 0 0 0 1 a.ppm\n10 20 5 30 30 -1\n";
        let points = "5 0 0 1 0 0 0 0.1 1 0\n";
        let scene = parse_scene(CAMERAS, images, points).unwrap();
        let kps = &scene.views[&1].keypoints;
        assert_eq!(kps.len(), 2);
        assert_eq!(kps[0].scale, DEFAULT_KEYPOINT_SCALE);
        assert_eq!(kps[1].point_id, None);
        assert_eq!(scene.tracks[&5].observations[0].xy, Point2::new(10.0, 20.0));
    }

    #[test]
    fn extended_header_switches_to_five_tuples() {
        let images = "#   POINTS2D[] as (X, Y, SCALE, ORIENTATION, POINT3D_ID)\n\
                      1 1 0 0 0 0 0 0 1 a.ppm\n10 20 3.5 0.25 5\n";
        let points = "5 0 0 1 0 0 0 0.1 1 0\n";
        let scene = parse_scene(CAMERAS, images, points).unwrap();
        let obs = &scene.tracks[&5].observations[0];
        assert_eq!(obs.scale, 3.5);
        assert_eq!(obs.orientation_rad, 0.25);
    }

    #[test]
    fn write_then_parse_is_identity_on_identity_scene() {
        let scene = parse_scene(CAMERAS, IDENTITY_IMAGE, "").unwrap();
        let text = write_scene(&scene).unwrap();
        let again = parse_scene(&text.cameras, &text.images, &text.points).unwrap();
        assert_eq!(scene, again);
    }

    #[test]
    fn writer_refuses_dangling_track() {
        let images = "#   POINTS2D[] as (X, Y, SCALE, ORIENTATION, POINT3D_ID)\n\
                      1 1 0 0 0 0 0 0 1 a.ppm\n10 20 3.5 0.25 5\n";
        let points = "5 0 0 1 0 0 0 0.1 1 0\n";
        let mut scene = parse_scene(CAMERAS, images, points).unwrap();
        scene.tracks.get_mut(&5).unwrap().observations[0].image_id = 9;
        assert!(matches!(write_scene(&scene), Err(SceneError::Integrity(_))));
    }
}
