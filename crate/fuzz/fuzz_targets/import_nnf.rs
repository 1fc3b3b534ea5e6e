#![no_main]

use libfuzzer_sys::fuzz_target;
use plp::compiler::import_nnf;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(g) = import_nnf(text) {
            let _ = g.is_decomposable();
            let _ = g.weighted_count(|_| 0.5);
        }
    }
});
