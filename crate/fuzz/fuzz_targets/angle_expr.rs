#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(x) = ringwalk_cli::config::parse_angle(s) {
            assert!(x.is_finite(), "{s:?} -> {x}");
        }
    }
});
