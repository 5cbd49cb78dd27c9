#![no_main]

use libfuzzer_sys::fuzz_target;
use targettype::eval::parse_categories;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_categories(text);
    }
});
