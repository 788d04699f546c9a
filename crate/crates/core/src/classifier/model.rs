//! Fault classifier network.
//!
//! Layer-by-layer lengths for the default 1024-sample input:
//!
//! ```text
//! input                1 x 1024
//! Conv1d(1->16, k=9)  16 x 1016
//! ReLU                16 x 1016
//! MaxPool1d(4)        16 x 254
//! Conv1d(16->32, k=9) 32 x 246
//! ReLU                32 x 246
//! MaxPool1d(4)        32 x 61     (two trailing samples dropped)
//! Conv1d(32->64, k=5) 64 x 57
//! ReLU                64 x 57
//! MaxPool1d(4)        64 x 14     (one trailing sample dropped)
//! Dense(896->64)       1 x 64
//! ReLU                 1 x 64
//! heads: Dense(64->4) class logits, Dense(64->1) normalized position
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Cache, Conv1d, Dense, Grads, Layer, LayerRecord, Sequential, Tensor};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnConfig {
    pub input_len: usize,
    /// Weight of the localization term.
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub init_seed: u64,
    /// Apply seeded augmentation to every training example each epoch.
    pub augment: bool,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            input_len: 1024,
            lambda: 1.0,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 30,
            init_seed: 7,
            augment: true,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidConfig(
                "batch_size and epochs must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
        }
        trunk_spec(self.input_len).map(|_| ())
    }
}

/// `(layers, flattened trunk width)` for the fixed stack, or a shape error
/// when `input_len` does not survive it.
fn trunk_spec(input_len: usize) -> Result<usize> {
    let mut len = input_len;
    for (k, pool) in [(9, 4), (9, 4), (5, 4)] {
        if len < k {
            return Err(Error::InvalidConfig(format!(
                "input_len {input_len} too short for the convolution stack"
            )));
        }
        len = (len - k + 1) / pool;
        if len == 0 {
            return Err(Error::InvalidConfig(format!(
                "input_len {input_len} too short for the pooling stack"
            )));
        }
    }
    Ok(64 * len)
}

/// Result of a forward pass.
#[derive(Debug, Clone)]
pub struct CnnOutput {
    pub logits: Vec<f64>,
    /// Raw (unclamped) normalized position.
    pub position: f64,
    pub(crate) hidden: Tensor,
    pub(crate) trunk_cache: Cache,
    pub(crate) class_cache: Cache,
    pub(crate) position_cache: Cache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cnn {
    pub input_len: usize,
    pub trunk: Sequential,
    pub class_head: Sequential,
    pub position_head: Sequential,
    /// Master seed of the dataset the model was trained on, if known.
    pub train_master_seed: Option<u64>,
}

impl Cnn {
    pub fn new(cfg: &CnnConfig) -> Result<Self> {
        let flat = trunk_spec(cfg.input_len)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed);
        let trunk = Sequential::new(vec![
            Layer::Conv1d(Conv1d::new(1, 16, 9, 1, &mut rng)),
            Layer::Relu,
            Layer::MaxPool1d { width: 4 },
            Layer::Conv1d(Conv1d::new(16, 32, 9, 1, &mut rng)),
            Layer::Relu,
            Layer::MaxPool1d { width: 4 },
            Layer::Conv1d(Conv1d::new(32, 64, 5, 1, &mut rng)),
            Layer::Relu,
            Layer::MaxPool1d { width: 4 },
            Layer::Dense(Dense::new(flat, 64, &mut rng)),
            Layer::Relu,
        ]);
        let mut class = Dense::new(64, 4, &mut rng);
        class.weights.iter_mut().for_each(|w| *w *= 0.1);
        let mut position = Dense::new(64, 1, &mut rng);
        position.weights.iter_mut().for_each(|w| *w *= 0.1);
        position.bias[0] = 0.5;
        Ok(Self {
            input_len: cfg.input_len,
            trunk,
            class_head: Sequential::new(vec![Layer::Dense(class)]),
            position_head: Sequential::new(vec![Layer::Dense(position)]),
            train_master_seed: None,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<CnnOutput> {
        if x.shape() != (1, self.input_len) {
            return Err(Error::Shape(format!(
                "model expects a 1x{} input, got {}x{}",
                self.input_len, x.rows, x.cols
            )));
        }
        let (hidden, trunk_cache) = self.trunk.forward(x)?;
        let (logits, class_cache) = self.class_head.forward(&hidden)?;
        let (pos, position_cache) = self.position_head.forward(&hidden)?;
        Ok(CnnOutput {
            logits: logits.data,
            position: pos.data[0],
            hidden,
            trunk_cache,
            class_cache,
            position_cache,
        })
    }

    /// Parameter gradients given upstream gradients for the logits and the
    /// raw position, in [`Cnn::params_mut`] order.
    pub fn backward(&self, out: &CnnOutput, grad_logits: &[f64], grad_pos: f64) -> Result<Grads> {
        let (gc, gh_c) =
            self.class_head
                .backward(&out.class_cache, &Tensor::row(grad_logits.to_vec()), true)?;
        let (gp, gh_p) =
            self.position_head
                .backward(&out.position_cache, &Tensor::row(vec![grad_pos]), true)?;
        let mut gh = gh_c.expect("input gradient requested");
        for (a, b) in gh
            .data
            .iter_mut()
            .zip(&gh_p.expect("input gradient requested").data)
        {
            *a += b;
        }
        debug_assert_eq!(gh.shape(), out.hidden.shape());
        let (gt, _) = self.trunk.backward(&out.trunk_cache, &gh, false)?;
        let mut all = gt.0;
        all.extend(gc.0);
        all.extend(gp.0);
        Ok(Grads(all))
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut v = self.trunk.params();
        v.extend(self.class_head.params());
        v.extend(self.position_head.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.trunk.params_mut();
        v.extend(self.class_head.params_mut());
        v.extend(self.position_head.params_mut());
        v
    }

    pub fn zero_grads(&self) -> Grads {
        Grads(self.params().iter().map(|p| vec![0.0; p.len()]).collect())
    }

    pub fn to_weights(&self) -> ModelWeights {
        let mut layers: Vec<LayerRecord> =
            self.trunk.layers.iter().map(LayerRecord::from).collect();
        layers.extend(self.class_head.layers.iter().map(LayerRecord::from));
        layers.extend(self.position_head.layers.iter().map(LayerRecord::from));
        ModelWeights {
            format_version: FORMAT_VERSION,
            input_len: self.input_len,
            train_master_seed: self.train_master_seed,
            layers,
        }
    }

    pub fn from_weights(w: ModelWeights) -> Result<Self> {
        if w.format_version != FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported weights format_version {}",
                w.format_version
            )));
        }
        if w.layers.len() < 3 {
            return Err(Error::Shape("weights need a trunk and two heads".into()));
        }
        let mut layers = w
            .layers
            .into_iter()
            .map(Layer::try_from)
            .collect::<Result<Vec<_>>>()?;
        let position = layers.pop().unwrap();
        let class = layers.pop().unwrap();
        let trunk = Sequential::new(layers);
        let hidden = *trunk
            .shapes((1, w.input_len))?
            .last()
            .expect("shapes include the input");
        match (&class, &position) {
            (Layer::Dense(c), Layer::Dense(p)) if c.outputs == 4 && p.outputs == 1 => {
                let heads_in = hidden.0 * hidden.1;
                if c.inputs != heads_in || p.inputs != heads_in {
                    return Err(Error::Shape("head widths do not match the trunk".into()));
                }
            }
            _ => {
                return Err(Error::Shape(
                    "last two layers must be Dense(->4) and Dense(->1) heads".into(),
                ))
            }
        }
        Ok(Self {
            input_len: w.input_len,
            trunk,
            class_head: Sequential::new(vec![class]),
            position_head: Sequential::new(vec![position]),
            train_master_seed: w.train_master_seed,
        })
    }
}

/// Serialized model: trunk layers in order, then the class head and the
/// position head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub format_version: u32,
    pub input_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_master_seed: Option<u64>,
    pub layers: Vec<LayerRecord>,
}
