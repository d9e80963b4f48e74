#![no_main]

use libfuzzer_sys::fuzz_target;
use ringwalk_cli::config::parse_rational;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(r) = parse_rational(s) {
        let back = parse_rational(&r.to_string()).expect("display form parses");
        assert_eq!(back, r);
    }
});
