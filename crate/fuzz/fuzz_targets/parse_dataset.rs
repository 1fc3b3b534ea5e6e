#![no_main]

use libfuzzer_sys::fuzz_target;
use plp::parser::{format_dataset, parse_dataset};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(d) = parse_dataset(text) {
            assert_eq!(parse_dataset(&format_dataset(&d)).expect("formatted dataset parses"), d);
        }
    }
});
