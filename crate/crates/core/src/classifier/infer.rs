use super::data::preprocess;
use super::model::Cnn;
use super::train::argmax;
use crate::baseline::{local_step_estimate, ThresholdConfig};
use crate::error::{Error, Result};
use crate::nn::{softmax, Tensor};
use crate::plant::{Detection, FaultClass, Trace};

/// Class and position from the network. `loss_db_est` comes from the
/// two-segment estimate at the predicted position (0 when that position is
/// too close to a trace end).
pub fn infer(model: &Cnn, t: &Trace) -> Result<Detection> {
    infer_with(model, t, &ThresholdConfig::default())
}

pub fn infer_with(model: &Cnn, t: &Trace, thresholds: &ThresholdConfig) -> Result<Detection> {
    let x = preprocess(t, model.input_len)?;
    let out = model.forward(&x)?;
    let probs = softmax(&out.logits);
    let k = argmax(&probs);
    let class = FaultClass::from_index(k).expect("four logits");
    let confidence = probs[k].clamp(0.0, 1.0);
    if class == FaultClass::Normal {
        return Ok(Detection::normal(confidence));
    }
    let range = t.range_m();
    let position_m = out.position.clamp(0.0, 1.0) * range;
    let idx = (position_m / t.spacing_m).round() as usize;
    let loss_db_est = local_step_estimate(t, idx, thresholds)
        .map(|e| e.loss_db.max(0.0))
        .unwrap_or(0.0);
    Ok(Detection {
        class,
        position_m: Some(position_m),
        loss_db_est,
        confidence,
    })
}

/// Number of selectable activation layers: the input plus every trunk layer.
pub fn activation_layers(model: &Cnn) -> usize {
    model.trunk.layers.len() + 1
}

/// Activation tensor at `layer_index`: 0 is the preprocessed input, `k` is
/// the output of the `k`-th trunk layer. Rows are channels.
pub fn activation_map(model: &Cnn, t: &Trace, layer_index: usize) -> Result<Tensor> {
    if layer_index >= activation_layers(model) {
        return Err(Error::InvalidArgument(format!(
            "layer index {layer_index} out of range (0..{})",
            activation_layers(model)
        )));
    }
    let x = preprocess(t, model.input_len)?;
    let mut acts = model.trunk.activations(&x)?;
    Ok(acts.swap_remove(layer_index))
}
