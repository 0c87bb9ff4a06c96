#![no_main]

use libfuzzer_sys::fuzz_target;
use voxbeam_core::render::Camera;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cam) = Camera::parse_toml(text) {
        assert_eq!(Camera::parse_toml(&cam.to_toml()).ok(), Some(cam));
    }
});
