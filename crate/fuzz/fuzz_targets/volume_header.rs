#![no_main]

use libfuzzer_sys::fuzz_target;
use voxbeam_core::volume::VolumeHeader;

// Input: a TOML header, a NUL byte, then the raw voxel array.
fuzz_target!(|data: &[u8]| {
    let (text, raw) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], &data[i + 1..]),
        None => (data, &[][..]),
    };
    let Ok(text) = std::str::from_utf8(text) else { return };
    if let Ok(header) = VolumeHeader::parse(text) {
        assert_eq!(VolumeHeader::parse(&header.to_toml()).ok(), Some(header.clone()));
        if let Ok(grid) = header.decode(raw) {
            assert!(grid.values().iter().all(|v| (0.0..=1.0).contains(&f64::from(*v))));
        }
    }
});
