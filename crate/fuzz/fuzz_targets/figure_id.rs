#![no_main]

use libfuzzer_sys::fuzz_target;
use ringwalk_cli::figures::{figure_spec, FigureId};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(id) = FigureId::parse(s) {
            let spec = figure_spec(&id);
            assert_eq!(spec.id, id.as_str());
        }
    }
});
