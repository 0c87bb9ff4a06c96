#![no_main]

use libfuzzer_sys::fuzz_target;
use voxbeam_core::wire::decode_packet;

fuzz_target!(|data: &[u8]| {
    // Valid packets re-serialise to the exact input bytes.
    if let Ok(packet) = decode_packet(data) {
        assert_eq!(packet.to_bytes(), data);
        let _ = packet.rgb8();
    }
});
