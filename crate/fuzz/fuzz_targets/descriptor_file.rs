#![no_main]

use libfuzzer_sys::fuzz_target;
use psforge::descriptors::DescriptorSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = DescriptorSet::decode(data) {
        // Values are stored bit for bit.
        assert_eq!(set.encode(), data);
    }
});
