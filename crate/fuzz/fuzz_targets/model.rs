#![no_main]

use libfuzzer_sys::fuzz_target;
use targettype::ltr::{decode_model, encode_model};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((model, header)) = decode_model(text) {
        let encoded = encode_model(&model, &header).expect("decoded model encodes");
        let (again, _) = decode_model(&encoded).expect("re-encoded model decodes");
        assert_eq!(encode_model(&again, &header).unwrap(), encoded);
    }
});
