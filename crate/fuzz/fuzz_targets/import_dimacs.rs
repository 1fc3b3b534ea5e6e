#![no_main]

use libfuzzer_sys::fuzz_target;
use plp::cnf::{export_dimacs, import_dimacs};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(f) = import_dimacs(text) {
            let _ = import_dimacs(&export_dimacs(&f));
        }
    }
});
