#![no_main]

use libfuzzer_sys::fuzz_target;
use psforge::patch::dataset::{decode_patch_file, encode_patch_file};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = decode_patch_file(data) {
        let again = decode_patch_file(&encode_patch_file(&records)).unwrap();
        assert_eq!(again.len(), records.len());
    }
});
