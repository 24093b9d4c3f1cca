#![no_main]

use libfuzzer_sys::fuzz_target;

// Config parsing plus the validation pass behind it must be total: any
// byte string either yields a config or an error, never a panic.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = dp_spider::harness::ExperimentConfig::from_json(text) {
            let _ = config.validate();
            let _ = config.to_problem();
        }
    }
});
