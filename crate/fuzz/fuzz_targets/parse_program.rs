#![no_main]

use libfuzzer_sys::fuzz_target;
use plp::parser::parse_program;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = parse_program(text) {
            let again = parse_program(&p.to_string()).expect("printed program parses");
            assert_eq!(again, p);
        }
    }
});
