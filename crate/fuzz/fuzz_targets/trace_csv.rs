#![no_main]

use libfuzzer_sys::fuzz_target;
use otdr_core::io::{trace_from_csv, trace_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = trace_from_csv(text) {
        // Anything accepted must survive a write/read cycle unchanged.
        let again = trace_from_csv(&trace_to_csv(&t)).expect("re-parse of written trace");
        assert_eq!(again.samples, t.samples);
    }
});
