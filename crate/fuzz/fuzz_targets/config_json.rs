#![no_main]

use libfuzzer_sys::fuzz_target;
use otdr_core::baseline::ThresholdConfig;
use otdr_core::classifier::{CnnConfig, SamplerConfig};
use otdr_core::io::from_json;
use otdr_core::plant::AcquisitionConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let acq = from_json::<AcquisitionConfig>(text, "acquisition").ok();
    if let Some(a) = &acq {
        let _ = a.validate();
    }
    if let Ok(s) = from_json::<SamplerConfig>(text, "sampler") {
        let _ = s.validate(acq.as_ref().unwrap_or(&AcquisitionConfig::default()));
    }
    if let Ok(c) = from_json::<CnnConfig>(text, "cnn") {
        let _ = c.validate();
    }
    if let Ok(t) = from_json::<ThresholdConfig>(text, "thresholds") {
        let _ = t.validate(1.0);
    }
});
