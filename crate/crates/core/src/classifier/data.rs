use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::plant::{FaultLabel, Trace};
use crate::synth::{add_linear_noise, META_NOISE_FLOOR, META_NOISE_SIGMA};

/// Standard-deviation floor used by [`preprocess`].
pub const STD_FLOOR: f64 = 1e-6;

/// Magnitudes of one augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraws {
    pub offset_db: f64,
    /// Total noise sigma relative to the trace's own; 1 adds nothing.
    pub noise_multiplier: f64,
    pub shift_m: f64,
    pub noise_seed: u64,
}

impl AugmentDraws {
    pub fn identity() -> Self {
        Self {
            offset_db: 0.0,
            noise_multiplier: 1.0,
            shift_m: 0.0,
            noise_seed: 0,
        }
    }

    /// Offset uniform in ±2 dB, noise multiplier uniform in (1, 1.5), shift
    /// uniform in ±50 m.
    pub fn draw(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            offset_db: rng.random_range(-2.0..2.0),
            noise_multiplier: rng.random_range(1.0..1.5),
            shift_m: rng.random_range(-50.0..50.0),
            noise_seed: rng.random(),
        }
    }
}

/// Seeded augmentation: see [`AugmentDraws::draw`] and [`augment_with`].
pub fn augment(t: &Trace, label: &FaultLabel, seed: u64) -> (Trace, FaultLabel) {
    augment_with(t, label, &AugmentDraws::draw(seed))
}

/// Extra linear-domain noise (bringing the total sigma to
/// `noise_multiplier` times the recorded one), then a horizontal shift with
/// leading-edge padding, then a vertical offset. The label follows the shift
/// and is clipped to the interior of the trace.
pub fn augment_with(t: &Trace, label: &FaultLabel, d: &AugmentDraws) -> (Trace, FaultLabel) {
    let mut out = t.clone();

    let sigma: f64 = t
        .meta
        .get(META_NOISE_SIGMA)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.0);
    let extra = sigma
        * (d.noise_multiplier * d.noise_multiplier - 1.0)
            .max(0.0)
            .sqrt();
    if extra > 0.0 && extra.is_finite() {
        let floor = t
            .meta
            .get(META_NOISE_FLOOR)
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| t.samples.iter().cloned().fold(f64::INFINITY, f64::min));
        add_linear_noise(&mut out.samples, extra, d.noise_seed, floor);
    }

    let mut new_label = *label;
    if d.shift_m != 0.0 && t.len() > 1 {
        let src = out.samples.clone();
        let shift = d.shift_m / t.spacing_m;
        let last = src.len() - 1;
        for (i, v) in out.samples.iter_mut().enumerate() {
            let x = i as f64 - shift;
            *v = if x <= 0.0 {
                src[0]
            } else if x >= last as f64 {
                src[last]
            } else {
                let k = x.floor() as usize;
                let f = x - k as f64;
                src[k] + f * (src[k + 1] - src[k])
            };
        }
        if let Some(p) = label.position_m {
            let lo = t.spacing_m;
            let hi = t.range_m() - t.spacing_m;
            new_label.position_m = Some((p + d.shift_m).clamp(lo, hi));
        }
    }

    if d.offset_db != 0.0 {
        out.samples.iter_mut().for_each(|v| *v += d.offset_db);
    }
    (out, new_label)
}

/// Linear interpolation onto `input_len` uniform points spanning the trace,
/// then per-trace standardization.
pub fn resample(t: &Trace, input_len: usize) -> Result<Vec<f64>> {
    if t.len() < 2 || input_len < 2 {
        return Err(Error::InvalidArgument(
            "preprocessing needs at least two samples".into(),
        ));
    }
    if t.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "trace has non-finite samples".into(),
        ));
    }
    let last = t.len() - 1;
    let step = last as f64 / (input_len - 1) as f64;
    Ok((0..input_len)
        .map(|k| {
            let x = k as f64 * step;
            let i = (x.floor() as usize).min(last - 1);
            let f = x - i as f64;
            t.samples[i] + f * (t.samples[i + 1] - t.samples[i])
        })
        .collect())
}

pub fn preprocess(t: &Trace, input_len: usize) -> Result<Tensor> {
    let mut v = resample(t, input_len)?;
    if v.iter().all(|&x| x == v[0]) {
        return Ok(Tensor::row(vec![0.0; input_len]));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(STD_FLOOR);
    v.iter_mut().for_each(|x| *x = (*x - mean) / std);
    Ok(Tensor::row(v))
}
