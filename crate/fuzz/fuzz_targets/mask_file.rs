#![no_main]

use libfuzzer_sys::fuzz_target;
use psforge::descriptors::ValidityMask;

fuzz_target!(|data: &[u8]| {
    if let Ok(mask) = ValidityMask::decode(data) {
        // Padding bits are rejected, so the encoding is canonical.
        assert_eq!(mask.encode(), data);
    }
});
