use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{augment, preprocess};
use super::model::{Cnn, CnnConfig};
use super::sampler::DatasetItem;
use crate::error::{Error, Result};
use crate::nn::{adam_step, loss_ce_smoothl1, OptimizerState, Tensor};
use crate::plant::{FaultLabel, Trace};
use crate::seed::mix;

const SPLIT_SALT: u64 = 0x5EED_0000_0000_5E75;
const AUGMENT_SALT: u64 = 0xA06E_0000_0000_0001;

/// Anything that pairs a trace with its ground truth.
pub trait LabelledTrace {
    fn trace(&self) -> &Trace;
    fn label(&self) -> FaultLabel;
}

impl LabelledTrace for DatasetItem {
    fn trace(&self) -> &Trace {
        &self.trace
    }
    fn label(&self) -> FaultLabel {
        self.label
    }
}

impl LabelledTrace for (Trace, FaultLabel) {
    fn trace(&self) -> &Trace {
        &self.0
    }
    fn label(&self) -> FaultLabel {
        self.1
    }
}

/// Item `i` belongs to the validation split when
/// `mix(SPLIT_SALT, i) % 5 == 0` (about 20%).
pub fn is_validation(index: usize) -> bool {
    mix(SPLIT_SALT, index as u64).is_multiple_of(5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the best validation accuracy (earliest on
    /// ties).
    pub model: Cnn,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Training log as CSV: `epoch,train_loss,val_loss,val_acc`.
pub fn log_to_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_acc\n");
    for e in log {
        s.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch, e.train_loss, e.val_loss, e.val_acc
        ));
    }
    s
}

struct Example {
    input: Tensor,
    class: usize,
    position: Option<f64>,
}

fn example(t: &Trace, label: &FaultLabel, input_len: usize) -> Result<Example> {
    let range = t.range_m();
    Ok(Example {
        input: preprocess(t, input_len)?,
        class: label.class.index(),
        position: label.position_m.map(|p| p / range),
    })
}

fn evaluate(model: &Cnn, examples: &[Example], lambda: f64) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for ex in examples {
        let out = model.forward(&ex.input)?;
        let l = loss_ce_smoothl1(&out.logits, ex.class, out.position, ex.position, lambda)?;
        loss += l.loss;
        if argmax(&out.logits) == ex.class {
            correct += 1;
        }
    }
    let n = examples.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn train<T: LabelledTrace>(dataset: &[T], cfg: &CnnConfig) -> Result<TrainOutcome> {
    train_with_progress(dataset, cfg, |_| {})
}

/// Minibatch Adam on the joint loss. Single-threaded; the result is a pure
/// function of the dataset and `cfg`.
pub fn train_with_progress<T: LabelledTrace>(
    dataset: &[T],
    cfg: &CnnConfig,
    mut progress: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("training dataset is empty".into()));
    }
    cfg.validate()?;
    for item in dataset {
        let v = item.label().violations(item.trace().range_m());
        if !v.is_empty() {
            return Err(Error::InvalidScenario(v));
        }
    }

    let (mut train_idx, mut val_idx): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| !is_validation(i));
    if train_idx.is_empty() {
        train_idx = val_idx.clone();
    }
    if val_idx.is_empty() {
        val_idx = train_idx.clone();
    }

    let val: Vec<Example> = val_idx
        .iter()
        .map(|&i| example(dataset[i].trace(), &dataset[i].label(), cfg.input_len))
        .collect::<Result<_>>()?;
    let cached: Option<Vec<Example>> = if cfg.augment {
        None
    } else {
        Some(
            train_idx
                .iter()
                .map(|&i| example(dataset[i].trace(), &dataset[i].label(), cfg.input_len))
                .collect::<Result<_>>()?,
        )
    };

    let mut model = Cnn::new(cfg)?;
    let mut opt = OptimizerState::new(cfg.learning_rate);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Cnn)> = None;
    // Positions within `train_idx`.
    let mut order: Vec<usize> = (0..train_idx.len()).collect();

    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.init_seed, epoch as u64));
        order.shuffle(&mut rng);
        let aug_base = mix(cfg.init_seed ^ AUGMENT_SALT, epoch as u64);

        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zero_grads();
            for &k in batch {
                let built;
                let ex = match &cached {
                    Some(c) => &c[k],
                    None => {
                        let i = train_idx[k];
                        let (t, l) = augment(
                            dataset[i].trace(),
                            &dataset[i].label(),
                            mix(aug_base, i as u64),
                        );
                        built = example(&t, &l, cfg.input_len)?;
                        &built
                    }
                };
                let out = model.forward(&ex.input)?;
                let l =
                    loss_ce_smoothl1(&out.logits, ex.class, out.position, ex.position, cfg.lambda)?;
                loss_sum += l.loss;
                let g = model.backward(&out, &l.grad_logits, l.grad_pos)?;
                grads.add_assign(&g);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut model.params_mut(), &grads.0, &mut opt)?;
        }

        let (val_loss, val_acc) = evaluate(&model, &val, cfg.lambda)?;
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / train_idx.len() as f64,
            val_loss,
            val_acc,
        };
        progress(&entry);
        log.push(entry);
        if best.as_ref().is_none_or(|(_, acc, _)| val_acc > *acc) {
            best = Some((epoch, val_acc, model.clone()));
        }
    }

    let (best_epoch, best_val_acc, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        best_val_acc,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::FaultClass;

    #[test]
    fn split_is_disjoint_and_about_a_fifth() {
        let val = (0..10_000).filter(|&i| is_validation(i)).count();
        assert!((1800..2200).contains(&val), "{val}");
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0, 1.0]), 1);
    }

    #[test]
    fn empty_dataset_rejected() {
        let d: Vec<(Trace, FaultLabel)> = vec![];
        assert!(train(&d, &CnnConfig::default()).is_err());
    }

    #[test]
    fn log_csv_header() {
        let csv = log_to_csv(&[EpochLog {
            epoch: 1,
            train_loss: 0.5,
            val_loss: 0.25,
            val_acc: 1.0,
        }]);
        assert_eq!(csv, "epoch,train_loss,val_loss,val_acc\n1,0.5,0.25,1\n");
    }

    #[test]
    fn class_index_mapping() {
        assert_eq!(
            FaultClass::from_index(argmax(&[0.1, 0.2, 0.9, 0.3])),
            Some(FaultClass::Bend)
        );
    }
}
