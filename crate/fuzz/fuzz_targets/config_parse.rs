#![no_main]

use libfuzzer_sys::fuzz_target;
use ringwalk_cli::config::ExperimentConfig;

// Parsing and validation must reject bad input with an error, never a panic.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ExperimentConfig::from_toml(text) else {
        return;
    };
    let again = ExperimentConfig::from_toml(&cfg.to_toml()).expect("serialized config parses");
    assert_eq!(again, cfg);
    let _ = cfg.angles();
    let _ = cfg.momentum_grid();
    let _ = cfg.initial_terms();
    let _ = cfg.history();
    if cfg.n_half.is_some_and(|n| n <= 64) {
        let _ = cfg.ring();
    }
});
