#![no_main]

use libfuzzer_sys::fuzz_target;
use psforge::scene::{parse_scene, write_scene};

// Input is `cameras.txt \0 images.txt \0 points3D.txt`.
fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let mut parts = text.splitn(3, '\0');
    let cameras = parts.next().unwrap_or("");
    let images = parts.next().unwrap_or("");
    let points = parts.next().unwrap_or("");
    if let Ok(scene) = parse_scene(cameras, images, points) {
        // A parsed scene is consistent, so it must write and parse again.
        let out = write_scene(&scene).expect("parsed scene failed validation");
        parse_scene(&out.cameras, &out.images, &out.points).expect("written scene failed to parse");
    }
});
