#![no_main]

use libfuzzer_sys::fuzz_target;

// Result-record lines come back from disk on every verify; parsing must be
// total over arbitrary bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = dp_spider::harness::ResultRecord::from_json(text);
    }
});
