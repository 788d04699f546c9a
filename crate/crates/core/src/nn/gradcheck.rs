//! Finite-difference verification of reverse-mode gradients.

use super::layers::Sequential;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Worst disagreement found by [`check_gradients`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Parameters whose error exceeded both tolerances.
    pub failures: usize,
    pub checked: usize,
}

/// Relative error with an absolute floor: values within `abs_floor` of each
/// other count as agreeing.
pub fn agrees(analytic: f64, numeric: f64, rel_tol: f64, abs_floor: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= abs_floor || diff <= rel_tol * analytic.abs().max(numeric.abs())
}

/// Compares backward-pass gradients of the scalar `sum(projection * f(x))`
/// against central differences with step `h`, for every parameter.
pub fn check_gradients(
    model: &Sequential,
    x: &Tensor,
    projection: &[f64],
    h: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<GradCheck> {
    let (y, cache) = model.forward(x)?;
    if y.len() != projection.len() {
        return Err(Error::Shape(format!(
            "projection has {} entries for an output of {}",
            projection.len(),
            y.len()
        )));
    }
    let upstream = Tensor::from_vec(y.rows, y.cols, projection.to_vec())?;
    let (grads, _) = model.backward(&cache, &upstream, false)?;

    let objective = |m: &Sequential| -> Result<f64> {
        let (y, _) = m.forward(x)?;
        Ok(y.data.iter().zip(projection).map(|(a, b)| a * b).sum())
    };
    let mut probe = model.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        failures: 0,
        checked: 0,
    };
    for (p, g) in grads.0.iter().enumerate() {
        for j in 0..g.len() {
            let orig = probe.params_mut()[p][j];
            probe.params_mut()[p][j] = orig + h;
            let up = objective(&probe)?;
            probe.params_mut()[p][j] = orig - h;
            let down = objective(&probe)?;
            probe.params_mut()[p][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let diff = (g[j] - numeric).abs();
            let scale = g[j].abs().max(numeric.abs());
            out.max_abs_error = out.max_abs_error.max(diff);
            if scale > abs_floor {
                out.max_rel_error = out.max_rel_error.max(diff / scale);
            }
            if !agrees(g[j], numeric, rel_tol, abs_floor) {
                out.failures += 1;
            }
            out.checked += 1;
        }
    }
    Ok(out)
}
