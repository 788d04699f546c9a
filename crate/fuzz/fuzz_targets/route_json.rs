#![no_main]

use libfuzzer_sys::fuzz_target;
use otdr_core::geo::{locate_fault, RouteSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = serde_json::from_str::<RouteSpec>(text) else { return };
    if let Ok(route) = spec.into_route() {
        let len = route.length_m();
        for f in [0.0, 0.25, 0.5, 1.0] {
            let _ = locate_fault(&route, f * len);
        }
    }
});
