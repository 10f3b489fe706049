#![no_main]

use libfuzzer_sys::fuzz_target;
use psforge::patch::{decode_pnm, encode_pnm};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_pnm(data) {
        assert_eq!(img.data().len(), img.width() * img.height() * img.channels());
        assert_eq!(decode_pnm(&encode_pnm(&img)).unwrap(), img);
    }
});
