//! Trace synthesis: deterministic backscatter slope, event losses,
//! reflectance spikes and seeded linear-domain noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::plant::{
    db_to_linear, pulse_spatial_width, validate_scenario, AcquisitionConfig, EventKind, FaultClass,
    FaultLabel, FiberEvent, FiberScenario, Trace,
};

pub const META_SPACING: &str = "spacing_m";
pub const META_SEED: &str = "rng_seed";
pub const META_SCENARIO: &str = "scenario";
pub const META_NOISE_SIGMA: &str = "noise_sigma_linear";
pub const META_NOISE_FLOOR: &str = "noise_floor_db";
pub const META_PULSE_WIDTH: &str = "pulse_spatial_width_m";

/// Loss an event has applied by distance `z`.
fn applied_loss(e: &FiberEvent, z: f64, spacing: f64) -> f64 {
    match e.kind {
        EventKind::Splice | EventKind::Connector => {
            if z >= e.position_m {
                e.loss_db
            } else {
                0.0
            }
        }
        EventKind::Bend => {
            let span = e.extent_m.max(spacing);
            e.loss_db * ((z - e.position_m) / span).clamp(0.0, 1.0)
        }
        // Termination is handled separately.
        EventKind::FiberEnd => 0.0,
    }
}

/// Compact, stable description of a scenario's events.
pub fn scenario_id(s: &FiberScenario) -> String {
    if s.events.is_empty() {
        return "healthy".to_string();
    }
    s.events
        .iter()
        .map(|e| {
            format!(
                "{:?}@{}m/{}dB/{}dB/{}m",
                e.kind, e.position_m, e.loss_db, e.reflectance_spike_db, e.extent_m
            )
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn base_meta(s: &FiberScenario, trace: &mut Trace) {
    let c = &s.config;
    trace
        .meta
        .insert(META_SPACING.into(), c.sample_spacing_m.to_string());
    trace.meta.insert(META_SEED.into(), c.rng_seed.to_string());
    trace.meta.insert(META_SCENARIO.into(), scenario_id(s));
    trace
        .meta
        .insert(META_NOISE_FLOOR.into(), c.noise_floor_db.to_string());
    trace
        .meta
        .insert(META_PULSE_WIDTH.into(), pulse_spatial_width(c).to_string());
    trace.meta.insert("label".into(), label_meta(&s.label));
}

fn label_meta(l: &FaultLabel) -> String {
    match l.position_m {
        Some(p) => format!("{}@{}", l.class, p),
        None => l.class.to_string(),
    }
}

/// Noiseless trace for a scenario.
pub fn clean_trace(s: &FiberScenario) -> Result<Trace> {
    validate_scenario(s).map_err(Error::InvalidScenario)?;
    let c = &s.config;
    let n = c.sample_count();
    let dz = c.sample_spacing_m;
    let width = pulse_spatial_width(c);
    let slope = c.attenuation_db_per_km / 1000.0;

    let end = s.events.iter().find(|e| e.kind == EventKind::FiberEnd);

    let mut samples: Vec<f64> = (0..n)
        .map(|i| {
            let z = i as f64 * dz;
            if let Some(fe) = end {
                if z >= fe.position_m {
                    return c.noise_floor_db;
                }
            }
            let loss: f64 = s.events.iter().map(|e| applied_loss(e, z, dz)).sum();
            c.launch_level_db - slope * z - loss
        })
        .collect();

    for e in s.events.iter().filter(|e| e.kind.is_reflective()) {
        let p = e.position_m;
        let before: f64 = s
            .events
            .iter()
            .filter(|o| o.position_m < p)
            .map(|o| applied_loss(o, p, dz))
            .sum();
        let peak_base = c.launch_level_db - slope * p - before;
        let first = (p / dz).ceil() as usize;
        let mut i = first;
        while i < n {
            let z = i as f64 * dz;
            if z > p + width {
                break;
            }
            let spike = peak_base + e.reflectance_spike_db * (1.0 - (z - p) / width);
            if spike > samples[i] {
                samples[i] = spike;
            }
            i += 1;
        }
    }

    for v in &mut samples {
        if *v < c.noise_floor_db {
            *v = c.noise_floor_db;
        }
    }

    let mut trace = Trace::new(samples, dz);
    base_meta(s, &mut trace);
    trace.meta.insert(META_NOISE_SIGMA.into(), "0".into());
    Ok(trace)
}

/// Adds `sigma`-scaled standard-normal draws in the linear power domain and
/// converts back to dB, clamping at `floor_db`. The draw for sample `i` is the
/// `i`-th variate of a ChaCha8 stream seeded with `seed`.
pub fn add_linear_noise(samples: &mut [f64], sigma: f64, seed: u64, floor_db: f64) {
    if sigma == 0.0 {
        return;
    }
    let floor_lin = db_to_linear(floor_db);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in samples.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        let p = (db_to_linear(*v) + sigma * g).max(floor_lin);
        *v = 10.0 * p.log10();
    }
}

/// Clean trace plus seeded noise. With `noise_sigma_linear == 0` the result
/// is bitwise identical to [`clean_trace`].
pub fn noisy_trace(s: &FiberScenario) -> Result<Trace> {
    let mut trace = clean_trace(s)?;
    let c = &s.config;
    add_linear_noise(
        &mut trace.samples,
        c.noise_sigma_linear,
        c.rng_seed,
        c.noise_floor_db,
    );
    trace
        .meta
        .insert(META_NOISE_SIGMA.into(), c.noise_sigma_linear.to_string());
    Ok(trace)
}

/// Midpoints of the dataset sampler's loss ranges.
pub(crate) const REF_SPLICE_LOSS: f64 = 0.55;
pub(crate) const REF_BEND_LOSS: f64 = 1.75;
pub(crate) const REF_BEND_EXTENT: f64 = 10.5;
pub(crate) const REF_CONNECTOR_LOSS: f64 = 0.85;
pub(crate) const REF_CONNECTOR_SPIKE: f64 = 6.0;

/// The four archetypes on a 10 km span: healthy, splice at 3 km, bend at
/// 6 km and connector at 8 km.
pub fn reference_scenarios() -> Vec<FiberScenario> {
    let config = AcquisitionConfig::default();
    let make = |events: Vec<FiberEvent>, label: FaultLabel| FiberScenario {
        config: config.clone(),
        events,
        label,
    };
    vec![
        make(vec![], FaultLabel::normal()),
        make(
            vec![FiberEvent::splice(3000.0, REF_SPLICE_LOSS)],
            FaultLabel::fault(FaultClass::Splice, 3000.0),
        ),
        make(
            vec![FiberEvent::bend(6000.0, REF_BEND_LOSS, REF_BEND_EXTENT)],
            FaultLabel::fault(FaultClass::Bend, 6000.0),
        ),
        make(
            vec![FiberEvent::connector(
                8000.0,
                REF_CONNECTOR_LOSS,
                REF_CONNECTOR_SPIKE,
            )],
            FaultLabel::fault(FaultClass::Connector, 8000.0),
        ),
    ]
}
