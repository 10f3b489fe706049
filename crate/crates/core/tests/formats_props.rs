mod common;

use common::*;
use proptest::prelude::*;
use psforge::descriptors::{DescriptorSet, ValidityMask};
use psforge::patch::dataset::{decode_patch_file, encode_patch_file, HEADER_BYTES, RECORD_BYTES};
use psforge::patch::image::{decode_pnm, encode_pnm};
use psforge::patch::{PatchRecord, RawImage, PATCH_BYTES};
use psforge::sampler::PairList;
use rand::Rng;

/// Values that survive the f32 fields of the patch file unchanged.
fn f32_exact(r: &mut rand_chacha::ChaCha8Rng, lo: f32, hi: f32) -> f64 {
    r.random_range(lo..hi) as f64
}

fn random_record(r: &mut rand_chacha::ChaCha8Rng) -> PatchRecord {
    PatchRecord {
        pixels: (0..PATCH_BYTES).map(|_| r.random()).collect(),
        image_id: r.random(),
        track_id: r.random(),
        center_xy: [f32_exact(r, 0.0, 4000.0), f32_exact(r, 0.0, 3000.0)],
        scale: f32_exact(r, 0.5, 20.0),
        rotation_rad: f32_exact(r, -3.2, 3.2),
        crop_side_px: f32_exact(r, 20.0, 128.0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn patch_file_round_trip(seed in any::<u64>(), n in 0usize..12) {
        let mut r = rng(seed);
        let records: Vec<PatchRecord> = (0..n).map(|_| random_record(&mut r)).collect();
        let bytes = encode_patch_file(&records);
        prop_assert_eq!(bytes.len(), HEADER_BYTES + n * RECORD_BYTES);
        prop_assert_eq!(decode_patch_file(&bytes).unwrap(), records);
        // Any truncation is an error, never a panic.
        let cut = r.random_range(0..bytes.len());
        prop_assert!(decode_patch_file(&bytes[..cut]).is_err());
    }

    #[test]
    fn descriptor_file_round_trip(seed in any::<u64>(), n in 0usize..50, dim in 1usize..64) {
        let mut r = rng(seed);
        let data: Vec<f32> = (0..n * dim).map(|_| r.random_range(-10.0f32..10.0)).collect();
        let set = DescriptorSet::new(dim, data).unwrap();
        let bytes = set.encode();
        prop_assert_eq!(DescriptorSet::decode(&bytes).unwrap(), set);
        let cut = r.random_range(0..bytes.len());
        prop_assert!(DescriptorSet::decode(&bytes[..cut]).is_err());
    }

    #[test]
    fn mask_file_round_trip(seed in any::<u64>(), m in 0usize..40) {
        let mut r = rng(seed);
        let mut gen = || (0..m * m).map(|k| k / m != k % m && r.random_bool(0.5)).collect::<Vec<bool>>();
        let (a, b) = (gen(), gen());
        let mask = ValidityMask::new(m, a, b).unwrap();
        let bytes = mask.encode();
        prop_assert_eq!(bytes.len(), 8 + 2 * m * m.div_ceil(8));
        prop_assert_eq!(ValidityMask::decode(&bytes).unwrap(), mask);
    }

    #[test]
    fn pnm_round_trip(seed in any::<u64>(), w in 1usize..40, h in 1usize..40, gray in any::<bool>()) {
        let mut r = rng(seed);
        let channels = if gray { 1 } else { 3 };
        let img = RawImage::new(w, h, channels, (0..w * h * channels).map(|_| r.random()).collect()).unwrap();
        prop_assert_eq!(decode_pnm(&encode_pnm(&img)).unwrap(), img);
    }

    #[test]
    fn decoders_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let _ = decode_pnm(&bytes);
        let _ = decode_patch_file(&bytes);
        let _ = DescriptorSet::decode(&bytes);
        let _ = ValidityMask::decode(&bytes);
        let _ = PairList::parse_tsv(&String::from_utf8_lossy(&bytes));
    }

    #[test]
    fn pnm_header_fuzz(header in "P[56][ \n\t#a-z0-9]{0,40}", raster in prop::collection::vec(any::<u8>(), 0..64)) {
        let mut bytes = header.into_bytes();
        bytes.extend(raster);
        let _ = decode_pnm(&bytes);
    }
}

#[test]
fn pnm_comments_and_maxval() {
    let img = decode_pnm(b"P5\n# comment\n2 1\n# another\n15\n\x00\x0f").unwrap();
    assert_eq!(img.data(), &[0, 255]);
    assert!(decode_pnm(b"P5 2 1 256\n\x00\x00").is_err());
    assert!(decode_pnm(b"P6 2 1 255\n\x00\x00").is_err());
}
