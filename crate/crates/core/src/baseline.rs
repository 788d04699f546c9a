//! Classical event detector: fixed dB cutoffs applied to local two-segment
//! line fits, non-maximum suppression and a rule-based class decision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{pulse_spatial_width, AcquisitionConfig, Detection, FaultClass, Trace};

/// Two loss estimates closer than this are treated as the same plateau.
const PLATEAU_TOL_DB: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Half-window of each line fit.
    pub window_m: f64,
    pub loss_cutoff_db: f64,
    pub spike_cutoff_db: f64,
    pub bend_loss_cutoff_db: f64,
    /// Non-maximum suppression radius.
    pub guard_m: f64,
    /// Width of the region right of the candidate that is excluded from the
    /// loss fit and searched for a reflectance peak (one pulse width).
    pub spike_width_m: f64,
    /// Longest event the final loss measurement bridges. The reported loss
    /// comes from fits that leave this span clear around the event.
    pub event_span_m: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self::for_acquisition(&AcquisitionConfig::default())
    }
}

impl ThresholdConfig {
    pub fn for_acquisition(acq: &AcquisitionConfig) -> Self {
        let w = pulse_spatial_width(acq);
        Self {
            window_m: 50.0,
            loss_cutoff_db: 0.2,
            spike_cutoff_db: 1.0,
            bend_loss_cutoff_db: 1.0,
            guard_m: 2.0 * w,
            spike_width_m: w,
            event_span_m: 20.0,
        }
    }

    pub fn validate(&self, spacing_m: f64) -> Result<()> {
        let fields = [
            self.window_m,
            self.loss_cutoff_db,
            self.spike_cutoff_db,
            self.bend_loss_cutoff_db,
            self.guard_m,
            self.spike_width_m,
            self.event_span_m,
        ];
        if !fields.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidConfig(
                "threshold parameters must be positive and finite".into(),
            ));
        }
        if !(spacing_m > 0.0 && spacing_m.is_finite()) {
            return Err(Error::InvalidConfig(
                "trace spacing must be positive".into(),
            ));
        }
        if self.window_m < 5.0 * spacing_m {
            return Err(Error::InvalidConfig(
                "window_m must cover at least 5 samples".into(),
            ));
        }
        if self.bend_loss_cutoff_db <= self.loss_cutoff_db {
            return Err(Error::InvalidConfig(
                "bend_loss_cutoff_db must exceed loss_cutoff_db".into(),
            ));
        }
        if [self.window_m, self.spike_width_m, self.event_span_m]
            .iter()
            .any(|v| v / spacing_m > 1e7)
        {
            return Err(Error::InvalidConfig(
                "windows too large for trace spacing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEstimate {
    pub loss_db: f64,
    pub spike_db: f64,
}

/// Sample offsets of the fit windows relative to the candidate index.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    /// Left window is `i - left .. i`.
    left: usize,
    /// Spike region is `i ..= i + spike`.
    spike: usize,
    /// Right window is `i + right_start ..= i + right_end`.
    right_start: usize,
    right_end: usize,
}

impl Geometry {
    fn new(cfg: &ThresholdConfig, spacing: f64) -> Self {
        let steps = |d: f64| (d / spacing + 1e-9).floor() as usize;
        let spike = steps(cfg.spike_width_m);
        Self {
            left: steps(cfg.window_m),
            spike,
            right_start: spike + 1,
            right_end: steps(cfg.spike_width_m + cfg.window_m),
        }
    }

    fn admissible(&self, len: usize) -> std::ops::RangeInclusive<usize> {
        let hi = len.saturating_sub(1).saturating_sub(self.right_end);
        if len == 0 || hi < self.left || self.right_end < self.right_start {
            // Empty range.
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        self.left..=hi
    }
}

/// Least-squares line through `(offset, y)` pairs evaluated at offset 0.
fn fit_at_origin(ys: &[f64], first_offset: isize) -> f64 {
    let n = ys.len() as f64;
    let x_mean = first_offset as f64 + (n - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (k, &y) in ys.iter().enumerate() {
        let dx = first_offset as f64 + k as f64 - x_mean;
        sxx += dx * dx;
        sxy += dx * (y - y_mean);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    y_mean - slope * x_mean
}

fn estimate_unchecked(samples: &[f64], i: usize, g: &Geometry) -> StepEstimate {
    let left = &samples[i - g.left..i];
    let right = &samples[i + g.right_start..=i + g.right_end];
    let left_at = fit_at_origin(left, -(g.left as isize));
    let right_at = fit_at_origin(right, g.right_start as isize);
    let peak = samples[i..=i + g.spike]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    StepEstimate {
        loss_db: left_at - right_at,
        spike_db: peak - left_at,
    }
}

/// Step across a gap of `half_gap` samples on each side of `c`, with both
/// fits extrapolated to `c`. `None` when the windows leave the trace.
fn bridged_loss(samples: &[f64], c: usize, half_gap: usize, window: usize) -> Option<f64> {
    let lo = c.checked_sub(half_gap + window)?;
    let hi = c + half_gap + window;
    if hi >= samples.len() {
        return None;
    }
    let left = &samples[lo..c - half_gap];
    let right = &samples[c + half_gap + 1..=hi];
    let left_at = fit_at_origin(left, -((half_gap + window) as isize));
    let right_at = fit_at_origin(right, (half_gap + 1) as isize);
    Some(left_at - right_at)
}

/// Two-segment estimate at sample `i`: the left fit covers
/// `[z_i - window, z_i)`, the right fit covers
/// `(z_i + spike_width, z_i + spike_width + window]`, and the spike is the
/// largest sample of `[z_i, z_i + spike_width]` above the left fit.
pub fn local_step_estimate(t: &Trace, i: usize, cfg: &ThresholdConfig) -> Result<StepEstimate> {
    cfg.validate(t.spacing_m)?;
    let g = Geometry::new(cfg, t.spacing_m);
    if !g.admissible(t.len()).contains(&i) {
        return Err(Error::InvalidArgument(format!(
            "index {i} is within the fit window of a trace boundary"
        )));
    }
    Ok(estimate_unchecked(&t.samples, i, &g))
}

/// Estimates at every admissible index, as `(index, estimate)`.
pub fn scan(t: &Trace, cfg: &ThresholdConfig) -> Result<Vec<(usize, StepEstimate)>> {
    cfg.validate(t.spacing_m)?;
    let g = Geometry::new(cfg, t.spacing_m);
    Ok(g.admissible(t.len())
        .map(|i| (i, estimate_unchecked(&t.samples, i, &g)))
        .collect())
}

/// One surviving event after suppression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub position_m: f64,
    pub loss_db: f64,
    /// Largest spike estimate within `guard_m` of the candidate.
    pub spike_db: f64,
}

/// All events surviving non-maximum suppression, strongest first.
pub fn candidates(t: &Trace, cfg: &ThresholdConfig) -> Result<Vec<Candidate>> {
    cfg.validate(t.spacing_m)?;
    let g = Geometry::new(cfg, t.spacing_m);
    if t.len() < 4 * g.left {
        return Err(Error::InvalidArgument(format!(
            "trace of {} samples is shorter than four fit windows",
            t.len()
        )));
    }
    if t.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "trace has non-finite samples".into(),
        ));
    }
    let profile = scan(t, cfg)?;
    let mut order: Vec<usize> = (0..profile.len())
        .filter(|&k| {
            let e = profile[k].1;
            e.loss_db > cfg.loss_cutoff_db || e.spike_db > cfg.spike_cutoff_db
        })
        .collect();
    // Strongest loss first; ties go to the smaller distance.
    order.sort_by(|&a, &b| {
        profile[b]
            .1
            .loss_db
            .total_cmp(&profile[a].1.loss_db)
            .then(a.cmp(&b))
    });

    let dz = t.spacing_m;
    let mut kept: Vec<usize> = Vec::new();
    for k in order {
        let z = profile[k].0 as f64 * dz;
        if kept
            .iter()
            .all(|&q| (profile[q].0 as f64 * dz - z).abs() > cfg.guard_m)
        {
            kept.push(k);
        }
    }

    Ok(kept
        .into_iter()
        .map(|k| {
            let best = profile[k].1.loss_db;
            // Noiseless steps produce a flat run of equal estimates.
            let mut lo = k;
            while lo > 0 && (profile[lo - 1].1.loss_db - best).abs() <= PLATEAU_TOL_DB {
                lo -= 1;
            }
            let mut hi = k;
            while hi + 1 < profile.len()
                && (profile[hi + 1].1.loss_db - best).abs() <= PLATEAU_TOL_DB
            {
                hi += 1;
            }
            // A clean step gives exactly `spike + 2` of them, ending on the
            // first post-step sample; anything else reports the run centre.
            let mut position_m = if hi - lo == g.spike + 1 {
                profile[hi].0 as f64 * dz
            } else {
                (profile[lo].0 + profile[hi].0) as f64 * dz / 2.0
            };
            let z = profile[k].0 as f64 * dz;
            let mut loss_db = best;
            // Profile entry with the largest spike within the guard.
            let mut peak = k;
            for (q, (i, e)) in profile.iter().enumerate() {
                if (*i as f64 * dz - z).abs() <= cfg.guard_m
                    && e.spike_db > profile[peak].1.spike_db
                {
                    peak = q;
                }
            }
            let spike_db = profile[peak].1.spike_db;
            // Any reflection above the loss cutoff leaks into the left fit
            // just past the event, so the peak gives the better position.
            if spike_db > cfg.loss_cutoff_db {
                position_m = profile[peak].0 as f64 * dz;
            }
            // Extended events (bends) spill into the scan's fit windows and
            // read low there; measure across a gap that clears them.
            let c = (position_m / dz).round() as usize;
            let half_gap = (cfg.event_span_m / dz / 2.0).ceil() as usize;
            if let Some(l) = bridged_loss(&t.samples, c, half_gap, g.left) {
                loss_db = l;
            }
            Candidate {
                position_m,
                loss_db,
                spike_db,
            }
        })
        .collect())
}

/// Classify a candidate by the cutoff rules.
pub fn classify(c: &Candidate, cfg: &ThresholdConfig) -> Detection {
    let loss = c.loss_db.max(0.0);
    let (class, confidence) = if c.spike_db > cfg.spike_cutoff_db {
        (
            FaultClass::Connector,
            (c.spike_db / (2.0 * cfg.spike_cutoff_db)).min(1.0),
        )
    } else if loss >= cfg.bend_loss_cutoff_db {
        (FaultClass::Bend, (loss / cfg.bend_loss_cutoff_db).min(1.0))
    } else {
        (
            FaultClass::Splice,
            (loss / cfg.bend_loss_cutoff_db).min(1.0),
        )
    };
    Detection {
        class,
        position_m: Some(c.position_m),
        loss_db_est: loss,
        confidence: confidence.clamp(0.0, 1.0),
    }
}

/// Single strongest event, or Normal when nothing crosses a cutoff.
pub fn detect_threshold(t: &Trace, cfg: &ThresholdConfig) -> Result<Detection> {
    let found = candidates(t, cfg)?;
    match found.first() {
        Some(c) => Ok(classify(c, cfg)),
        None => {
            // Normal confidence: margin below the nearest cutoff.
            let worst = scan(t, cfg)?
                .iter()
                .map(|(_, e)| {
                    (e.loss_db / cfg.loss_cutoff_db).max(e.spike_db / cfg.spike_cutoff_db)
                })
                .fold(0.0, f64::max);
            Ok(Detection::normal((1.0 - worst).clamp(0.0, 1.0)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{FaultLabel, FiberEvent, FiberScenario};
    use crate::synth::clean_trace;

    fn trace(events: Vec<FiberEvent>) -> Trace {
        let s = FiberScenario {
            config: AcquisitionConfig {
                noise_sigma_linear: 0.0,
                ..Default::default()
            },
            events,
            label: FaultLabel::normal(),
        };
        clean_trace(&s).unwrap()
    }

    #[test]
    fn healthy_estimates_are_zero() {
        let t = trace(vec![]);
        let cfg = ThresholdConfig::default();
        for i in [50, 1234, 5000, 9948] {
            let e = local_step_estimate(&t, i, &cfg).unwrap();
            assert!(e.loss_db.abs() < 1e-9, "{e:?}");
            assert!(e.spike_db <= 1e-9, "{e:?}");
        }
        assert_eq!(
            detect_threshold(&t, &cfg).unwrap().class,
            FaultClass::Normal
        );
    }

    #[test]
    fn boundary_indices_rejected() {
        let t = trace(vec![]);
        let cfg = ThresholdConfig::default();
        assert!(local_step_estimate(&t, 49, &cfg).is_err());
        assert!(local_step_estimate(&t, 9950, &cfg).is_err());
        assert!(local_step_estimate(&t, 9949, &cfg).is_ok());
    }

    #[test]
    fn splice_step_estimate() {
        let t = trace(vec![FiberEvent::splice(3000.0, 0.5)]);
        let cfg = ThresholdConfig::default();
        let e = local_step_estimate(&t, 3000, &cfg).unwrap();
        assert!((e.loss_db - 0.5).abs() < 1e-6);
        let d = detect_threshold(&t, &cfg).unwrap();
        assert_eq!(d.class, FaultClass::Splice);
        assert!((d.position_m.unwrap() - 3000.0).abs() <= 1.0);
        assert!((d.loss_db_est - 0.5).abs() < 1e-6);
        assert!((d.confidence - 0.5).abs() < 1e-6);
    }

    #[test]
    fn connector_spike_estimate() {
        let t = trace(vec![FiberEvent::connector(8000.0, 0.5, 5.0)]);
        let cfg = ThresholdConfig::default();
        let e = local_step_estimate(&t, 8000, &cfg).unwrap();
        assert!((e.spike_db - 5.0).abs() < 1e-9, "{e:?}");
        assert!((e.loss_db - 0.5).abs() < 1e-6, "{e:?}");
        let d = detect_threshold(&t, &cfg).unwrap();
        assert_eq!(d.class, FaultClass::Connector);
        assert_eq!(d.position_m, Some(8000.0));
        assert_eq!(d.confidence, 1.0);
    }

    #[test]
    fn step_reported_at_first_post_step_sample() {
        for (p, want) in [(3000.0, 3000.0), (3000.4, 3001.0)] {
            let t = trace(vec![FiberEvent::splice(p, 0.5)]);
            let d = detect_threshold(&t, &ThresholdConfig::default()).unwrap();
            assert_eq!(d.position_m, Some(want));
            assert!((d.loss_db_est - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn long_bend_loss_is_bridged() {
        let t = trace(vec![FiberEvent::bend(5000.0, 1.2, 16.0)]);
        let cfg = ThresholdConfig::default();
        // The scan's own windows overlap the ramp and read low.
        let scanned = scan(&t, &cfg)
            .unwrap()
            .iter()
            .map(|(_, e)| e.loss_db)
            .fold(f64::MIN, f64::max);
        assert!(scanned < 1.0);
        let d = detect_threshold(&t, &cfg).unwrap();
        assert_eq!(d.class, FaultClass::Bend);
        assert!((d.loss_db_est - 1.2).abs() < 1e-9);
    }

    #[test]
    fn weak_reflection_fixes_position() {
        // Sampled peak 5 * (1 - 0.9 / w) is below the spike cutoff.
        let t = trace(vec![FiberEvent::connector(4000.1, 0.6, 5.0)]);
        let d = detect_threshold(&t, &ThresholdConfig::default()).unwrap();
        assert_eq!(d.class, FaultClass::Splice);
        assert_eq!(d.position_m, Some(4001.0));
        assert!((d.loss_db_est - 0.6).abs() < 1e-9);
    }

    #[test]
    fn bend_located_at_ramp_centre() {
        let t = trace(vec![FiberEvent::bend(6000.0, 2.0, 5.0)]);
        let cfg = ThresholdConfig::default();
        let d = detect_threshold(&t, &cfg).unwrap();
        assert_eq!(d.class, FaultClass::Bend);
        // Oracle: exhaustive argmax of the loss profile.
        let profile = scan(&t, &cfg).unwrap();
        let best = profile
            .iter()
            .map(|(_, e)| e.loss_db)
            .fold(f64::MIN, f64::max);
        let argmaxes: Vec<f64> = profile
            .iter()
            .filter(|(_, e)| (e.loss_db - best).abs() <= 1e-9)
            .map(|(i, _)| *i as f64)
            .collect();
        let p = d.position_m.unwrap();
        assert!(p >= argmaxes[0] && p <= *argmaxes.last().unwrap());
        assert!((p - 6002.5).abs() <= 1.0 + 2.5, "{p}");
    }

    #[test]
    fn shift_invariant() {
        let t = trace(vec![FiberEvent::splice(4321.0, 0.7)]);
        let cfg = ThresholdConfig::default();
        let base = detect_threshold(&t, &cfg).unwrap();
        let mut shifted = t.clone();
        shifted.samples.iter_mut().for_each(|v| *v += 7.25);
        let d = detect_threshold(&shifted, &cfg).unwrap();
        assert_eq!(d.class, base.class);
        assert_eq!(d.position_m, base.position_m);
        assert!((d.loss_db_est - base.loss_db_est).abs() < 1e-9);
    }

    #[test]
    fn short_trace_rejected() {
        let t = Trace::new(vec![1.0; 150], 1.0);
        assert!(detect_threshold(&t, &ThresholdConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ThresholdConfig::default();
        assert!(c.validate(1.0).is_ok());
        assert!(c.validate(20.0).is_err());
        c.bend_loss_cutoff_db = 0.1;
        assert!(c.validate(1.0).is_err());
        c = ThresholdConfig {
            guard_m: -1.0,
            ..Default::default()
        };
        assert!(c.validate(1.0).is_err());
    }
}
