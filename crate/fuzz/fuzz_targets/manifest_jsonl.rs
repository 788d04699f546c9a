#![no_main]

use libfuzzer_sys::fuzz_target;
use otdr_core::io::{manifest_from_jsonl, manifest_to_jsonl};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = manifest_from_jsonl(text) {
        let again = manifest_from_jsonl(&manifest_to_jsonl(&entries)).expect("re-parse");
        assert_eq!(again.len(), entries.len());
    }
});
