use super::layers::softmax;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub cross_entropy: f64,
    pub localization: f64,
    pub grad_logits: Vec<f64>,
    pub grad_pos: f64,
}

/// `0.5 d²` inside the unit interval, `|d| - 0.5` outside. Returns the value
/// and its derivative.
pub fn smooth_l1(d: f64) -> (f64, f64) {
    if d.abs() < 1.0 {
        (0.5 * d * d, d)
    } else {
        (d.abs() - 0.5, d.signum())
    }
}

/// Joint objective: cross-entropy of the class logits plus `lambda` times the
/// smooth-L1 position error. The position term is present only when a target
/// position is supplied for a non-Normal class (`class_target != 0`).
pub fn loss_ce_smoothl1(
    logits: &[f64],
    class_target: usize,
    pos_pred: f64,
    pos_target: Option<f64>,
    lambda: f64,
) -> Result<LossOutput> {
    if logits.len() != 4 {
        return Err(Error::Shape(format!(
            "expected 4 logits, got {}",
            logits.len()
        )));
    }
    if class_target >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "class index {class_target} out of range"
        )));
    }
    if class_target != 0 && pos_target.is_none() {
        return Err(Error::InvalidArgument(
            "fault classes need a position target".into(),
        ));
    }
    let p = softmax(logits);
    let cross_entropy = -p[class_target].max(f64::MIN_POSITIVE).ln();
    let mut grad_logits = p;
    grad_logits[class_target] -= 1.0;

    let (localization, grad_pos) = match pos_target {
        Some(t) if class_target != 0 => {
            let (v, d) = smooth_l1(pos_pred - t);
            (lambda * v, lambda * d)
        }
        _ => (0.0, 0.0),
    };
    Ok(LossOutput {
        loss: cross_entropy + localization,
        cross_entropy,
        localization,
        grad_logits,
        grad_pos,
    })
}
