#![no_main]

use libfuzzer_sys::fuzz_target;
use targettype::retrieval::{decode_index, encode_index};

// Anything that decodes must survive a re-encode unchanged.
fuzz_target!(|data: &[u8]| {
    if let Ok((index, provenance)) = decode_index(data) {
        let bytes = encode_index(&index, &provenance);
        let (again, p2) = decode_index(&bytes).expect("re-encoded index decodes");
        assert_eq!(index, again);
        assert_eq!(provenance, p2);
    }
});
