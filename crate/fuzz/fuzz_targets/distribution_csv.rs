#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 20 {
        return;
    }
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(rows) = ringwalk_cli::output::parse_distribution_csv(s) {
            assert!(rows.iter().all(|r| r.prob >= 0.0 && r.prob.is_finite()));
        }
    }
});
