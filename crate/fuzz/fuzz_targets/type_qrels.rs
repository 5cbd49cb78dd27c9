#![no_main]

use libfuzzer_sys::fuzz_target;
use targettype::eval::parse_type_qrels;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_type_qrels(text);
    }
});
