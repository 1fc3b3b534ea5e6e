#![no_main]

use libfuzzer_sys::fuzz_target;
use plp::parser::parse_atom;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(a) = parse_atom(text) {
            assert_eq!(parse_atom(&a.to_string()).expect("printed atom parses"), a);
        }
    }
});
