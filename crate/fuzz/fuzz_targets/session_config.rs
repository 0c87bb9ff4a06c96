#![no_main]

use libfuzzer_sys::fuzz_target;
use voxbeam_core::pipeline::SessionConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = SessionConfig::parse(text);
    }
});
