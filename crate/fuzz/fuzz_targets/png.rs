#![no_main]

use libfuzzer_sys::fuzz_target;
use voxbeam_core::imageio::decode_png;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_png(data) {
        assert!(img.pixels().iter().all(|p| p.min_element() >= 0.0 && p.max_element() <= 1.0));
    }
});
