#![no_main]

use libfuzzer_sys::fuzz_target;

// Sweep summaries round-trip through CSV; the strict reader must never
// panic, whatever the bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = dp_spider::harness::sweep::parse_sweep_csv(text);
    }
});
