#![no_main]

use libfuzzer_sys::fuzz_target;
use otdr_core::io::weights_from_json;
use otdr_core::nn::Tensor;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = weights_from_json(text) {
        if model.input_len <= 4096 {
            let _ = model.forward(&Tensor::zeros(1, model.input_len));
        }
    }
});
