#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use psforge_cli::eval::{parse_keypoints, parse_labels};

// Label and keypoint text files read by `eval`.
fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = parse_labels(&text, Path::new("labels.txt"));
    if let Ok(points) = parse_keypoints(&text, Path::new("keypoints.txt")) {
        assert!(points.iter().all(|p| p.x.is_finite() && p.y.is_finite()));
    }
});
