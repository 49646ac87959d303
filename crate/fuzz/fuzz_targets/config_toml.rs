//! Fuzz target for experiment configuration parsing and validation.
//!
//! Accepted documents must serialize back to TOML that parses to the same
//! configuration.

#![no_main]

use distkit::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ExperimentConfig::from_toml_str(text) else {
        return;
    };
    let written = cfg.to_toml_string().expect("serializing an accepted config");
    let again = ExperimentConfig::from_toml_str(&written).expect("re-parsing serialized config");
    assert_eq!(cfg, again);
});
