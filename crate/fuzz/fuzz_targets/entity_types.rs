#![no_main]

use libfuzzer_sys::fuzz_target;
use targettype::kb::{parse_entities, parse_entity_types, parse_taxonomy};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let tax = parse_taxonomy("Place\t\t\nCity\t\tPlace\nPerson\t\t\n").unwrap();
    let corpus = parse_entities("e1\tBerlin\tcapital\ne2\tBowie\tsinger\n").unwrap();
    for closure in [true, false] {
        if let Ok(assoc) = parse_entity_types(text, &tax, &corpus, closure) {
            for t in tax.iter() {
                let sum: f64 = assoc.extension(t).iter().map(|&e| assoc.weight(e, t)).sum();
                assert!(assoc.count(t) == 0 || (sum - 1.0).abs() < 1e-12);
            }
        }
    }
});
