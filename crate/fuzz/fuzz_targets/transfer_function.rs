#![no_main]

use libfuzzer_sys::fuzz_target;
use voxbeam_core::volume::TransferFunction;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(tf) = TransferFunction::parse(text) {
        for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let c = tf.classify(s);
            assert!(c.sigma_t >= 0.0 && c.sigma_t <= tf.sigma_max());
        }
    }
});
