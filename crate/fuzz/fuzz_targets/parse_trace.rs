#![no_main]

use libfuzzer_sys::fuzz_target;

// One line of a trace file: either a step or the trailing summary. Must
// parse or fail cleanly on any input.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = dp_spider::harness::record::TraceLine::from_json(text);
    }
});
