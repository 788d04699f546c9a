#![no_main]

use libfuzzer_sys::fuzz_target;
use otdr_core::io::scenario_from_json;
use otdr_core::synth::clean_trace;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = scenario_from_json(text) {
        // Keep synthesis bounded.
        if s.config.sample_count() <= 100_000 {
            let _ = clean_trace(&s);
        }
    }
});
