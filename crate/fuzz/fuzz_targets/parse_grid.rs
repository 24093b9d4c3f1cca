#![no_main]

use libfuzzer_sys::fuzz_target;

// The sweep-grid mini-language parser must reject garbage with an error,
// never a panic. Cell enumeration is deliberately not exercised here: a
// parsed grid can be combinatorially large by design.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = dp_spider::harness::GridSpec::parse(text);
    }
});
