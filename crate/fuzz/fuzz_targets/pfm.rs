#![no_main]

use libfuzzer_sys::fuzz_target;
use voxbeam_core::imageio::{decode_pfm, encode_pfm};

fuzz_target!(|data: &[u8]| {
    // Anything that decodes must survive a re-encode/decode unchanged.
    if let Ok(img) = decode_pfm(data) {
        let again = decode_pfm(&encode_pfm(&img)).expect("re-encoded PFM decodes");
        assert_eq!(again.width(), img.width());
        assert_eq!(again.height(), img.height());
    }
});
