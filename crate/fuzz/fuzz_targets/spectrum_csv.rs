#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 20 {
        return;
    }
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = ringwalk_cli::output::parse_spectrum_csv(s);
    }
});
