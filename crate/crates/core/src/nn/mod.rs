//! Minimal deterministic neural-network engine: 1-D convolution, ReLU, max
//! pooling, dense and softmax layers with hand-written backward passes, the
//! joint classification/localization loss and an Adam optimizer. All
//! arithmetic is `f64`.

mod adam;
mod gradcheck;
mod layers;
mod loss;
mod tensor;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, OptimizerState};
pub use gradcheck::{agrees, check_gradients, GradCheck};
pub use layers::{softmax, Cache, Conv1d, Dense, Grads, Layer, LayerCache, Sequential};
pub use loss::{loss_ce_smoothl1, smooth_l1, LossOutput};
pub use tensor::Tensor;

use crate::error::{Error, Result};

/// Portable form of one layer: parameter arrays flat and row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LayerRecord {
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    #[serde(rename = "ReLU")]
    Relu,
    MaxPool1d {
        width: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Softmax,
}

impl From<&Layer> for LayerRecord {
    fn from(l: &Layer) -> Self {
        match l {
            Layer::Conv1d(c) => LayerRecord::Conv1d {
                in_ch: c.in_ch,
                out_ch: c.out_ch,
                kernel: c.kernel,
                stride: c.stride,
                weights: c.weights.clone(),
                bias: c.bias.clone(),
            },
            Layer::Relu => LayerRecord::Relu,
            Layer::MaxPool1d { width } => LayerRecord::MaxPool1d { width: *width },
            Layer::Dense(d) => LayerRecord::Dense {
                inputs: d.inputs,
                outputs: d.outputs,
                weights: d.weights.clone(),
                bias: d.bias.clone(),
            },
            Layer::Softmax => LayerRecord::Softmax,
        }
    }
}

impl TryFrom<LayerRecord> for Layer {
    type Error = Error;

    fn try_from(r: LayerRecord) -> Result<Self> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        Ok(match r {
            LayerRecord::Conv1d {
                in_ch,
                out_ch,
                kernel,
                stride,
                weights,
                bias,
            } => {
                let expected = out_ch
                    .checked_mul(in_ch)
                    .and_then(|v| v.checked_mul(kernel));
                if expected != Some(weights.len()) || bias.len() != out_ch {
                    return Err(Error::Shape(
                        "Conv1d record has wrong parameter counts".into(),
                    ));
                }
                if kernel == 0 || stride == 0 || in_ch == 0 || out_ch == 0 {
                    return Err(Error::Shape("Conv1d dimensions must be positive".into()));
                }
                if !finite(&weights) || !finite(&bias) {
                    return Err(Error::InvalidArgument(
                        "non-finite Conv1d parameters".into(),
                    ));
                }
                Layer::Conv1d(Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    weights,
                    bias,
                })
            }
            LayerRecord::Relu => Layer::Relu,
            LayerRecord::MaxPool1d { width } => {
                if width == 0 {
                    return Err(Error::Shape("MaxPool1d width must be positive".into()));
                }
                Layer::MaxPool1d { width }
            }
            LayerRecord::Dense {
                inputs,
                outputs,
                weights,
                bias,
            } => {
                if inputs.checked_mul(outputs) != Some(weights.len()) || bias.len() != outputs {
                    return Err(Error::Shape(
                        "Dense record has wrong parameter counts".into(),
                    ));
                }
                if inputs == 0 || outputs == 0 {
                    return Err(Error::Shape("Dense dimensions must be positive".into()));
                }
                if !finite(&weights) || !finite(&bias) {
                    return Err(Error::InvalidArgument("non-finite Dense parameters".into()));
                }
                Layer::Dense(Dense {
                    inputs,
                    outputs,
                    weights,
                    bias,
                })
            }
            LayerRecord::Softmax => Layer::Softmax,
        })
    }
}
