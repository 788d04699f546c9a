//! Fiber plant description: acquisition parameters, events, scenarios,
//! traces and the labels/detections exchanged between detectors.
//!
//! Display convention is one-way dB: a healthy trace falls by
//! `attenuation_db_per_km` per kilometre and each event's loss appears once,
//! as a downward step at the event position.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Base linear-domain noise standard deviation used by the benchmark
/// configuration (units of the linear power at 0 dB).
pub const DEFAULT_NOISE_SIGMA: f64 = 10.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub wavelength_nm: f64,
    pub attenuation_db_per_km: f64,
    pub launch_level_db: f64,
    pub pulse_width_ns: f64,
    pub group_index: f64,
    pub sample_spacing_m: f64,
    pub range_m: f64,
    pub noise_sigma_linear: f64,
    pub noise_floor_db: f64,
    pub rng_seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            wavelength_nm: 1550.0,
            attenuation_db_per_km: 0.35,
            launch_level_db: 30.0,
            pulse_width_ns: 10.0,
            group_index: 1.468,
            sample_spacing_m: 1.0,
            range_m: 10_000.0,
            noise_sigma_linear: DEFAULT_NOISE_SIGMA,
            noise_floor_db: -10.0,
            rng_seed: 0,
        }
    }
}

impl AcquisitionConfig {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                out.push(Violation::new(msg));
            }
        };
        let all_finite = [
            self.wavelength_nm,
            self.attenuation_db_per_km,
            self.launch_level_db,
            self.pulse_width_ns,
            self.group_index,
            self.sample_spacing_m,
            self.range_m,
            self.noise_sigma_linear,
            self.noise_floor_db,
        ]
        .iter()
        .all(|v| v.is_finite());
        check(all_finite, "config values must be finite");
        check(self.wavelength_nm > 0.0, "wavelength_nm must be positive");
        check(
            self.sample_spacing_m > 0.0,
            "sample_spacing_m must be positive",
        );
        check(
            self.range_m >= 10.0 * self.sample_spacing_m,
            "range_m must be at least 10 sample spacings",
        );
        check(
            self.attenuation_db_per_km > 0.0,
            "attenuation_db_per_km must be positive",
        );
        check(self.pulse_width_ns > 0.0, "pulse_width_ns must be positive");
        check(
            (1.0..=2.0).contains(&self.group_index),
            "group_index must lie in [1, 2]",
        );
        check(
            self.noise_sigma_linear >= 0.0,
            "noise_sigma_linear must be nonnegative",
        );
        check(
            self.noise_floor_db < self.launch_level_db,
            "noise_floor_db must be below launch_level_db",
        );
        if all_finite && self.sample_spacing_m > 0.0 && self.range_m / self.sample_spacing_m > 1e8 {
            out.push(Violation::new("trace would exceed 1e8 samples"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(v))
        }
    }

    /// Number of samples a synthesized trace carries.
    pub fn sample_count(&self) -> usize {
        (self.range_m / self.sample_spacing_m + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Splice,
    Bend,
    Connector,
    FiberEnd,
}

impl EventKind {
    pub fn is_reflective(self) -> bool {
        matches!(self, EventKind::Connector | EventKind::FiberEnd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberEvent {
    pub kind: EventKind,
    pub position_m: f64,
    #[serde(default)]
    pub loss_db: f64,
    #[serde(default)]
    pub reflectance_spike_db: f64,
    #[serde(default)]
    pub extent_m: f64,
}

impl FiberEvent {
    pub fn splice(position_m: f64, loss_db: f64) -> Self {
        Self {
            kind: EventKind::Splice,
            position_m,
            loss_db,
            reflectance_spike_db: 0.0,
            extent_m: 0.0,
        }
    }

    pub fn bend(position_m: f64, loss_db: f64, extent_m: f64) -> Self {
        Self {
            kind: EventKind::Bend,
            position_m,
            loss_db,
            reflectance_spike_db: 0.0,
            extent_m,
        }
    }

    pub fn connector(position_m: f64, loss_db: f64, spike_db: f64) -> Self {
        Self {
            kind: EventKind::Connector,
            position_m,
            loss_db,
            reflectance_spike_db: spike_db,
            extent_m: 0.0,
        }
    }

    pub fn fiber_end(position_m: f64, spike_db: f64) -> Self {
        Self {
            kind: EventKind::FiberEnd,
            position_m,
            loss_db: 0.0,
            reflectance_spike_db: spike_db,
            extent_m: 0.0,
        }
    }
}

/// The four-class fault taxonomy. The discriminant is the class index used
/// by the classifier's logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultClass {
    Normal = 0,
    Splice = 1,
    Bend = 2,
    Connector = 3,
}

impl FaultClass {
    pub const ALL: [FaultClass; 4] = [
        FaultClass::Normal,
        FaultClass::Splice,
        FaultClass::Bend,
        FaultClass::Connector,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultClass::Normal => "Normal",
            FaultClass::Splice => "Splice",
            FaultClass::Bend => "Bend",
            FaultClass::Connector => "Connector",
        }
    }
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultLabel {
    pub class: FaultClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_m: Option<f64>,
}

impl FaultLabel {
    pub fn normal() -> Self {
        Self {
            class: FaultClass::Normal,
            position_m: None,
        }
    }

    pub fn fault(class: FaultClass, position_m: f64) -> Self {
        Self {
            class,
            position_m: Some(position_m),
        }
    }

    pub fn violations(&self, range_m: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        match (self.class, self.position_m) {
            (FaultClass::Normal, Some(_)) => {
                out.push(Violation::new("Normal label must not carry a position"))
            }
            (FaultClass::Normal, None) => {}
            (_, None) => out.push(Violation::new("fault label requires a position")),
            (_, Some(p)) => {
                if !(p > 0.0 && p < range_m) {
                    out.push(Violation::new(
                        "label position must lie inside (0, range_m)",
                    ));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberScenario {
    #[serde(default)]
    pub config: AcquisitionConfig,
    #[serde(default)]
    pub events: Vec<FiberEvent>,
    pub label: FaultLabel,
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub reason: String,
}

impl Violation {
    pub fn new(reason: impl Into<String>) -> Self {
        Self {
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.reason)
    }
}

/// Uniformly sampled backscatter curve in dB versus distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<f64>,
    pub spacing_m: f64,
    pub meta: BTreeMap<String, String>,
}

impl Trace {
    pub fn new(samples: Vec<f64>, spacing_m: f64) -> Self {
        Self {
            samples,
            spacing_m,
            meta: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Distance of the last sample.
    pub fn range_m(&self) -> f64 {
        self.samples.len().saturating_sub(1) as f64 * self.spacing_m
    }

    pub fn distance_at(&self, i: usize) -> f64 {
        i as f64 * self.spacing_m
    }
}

/// Predicted fault.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: FaultClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_m: Option<f64>,
    pub loss_db_est: f64,
    pub confidence: f64,
}

impl Detection {
    pub fn normal(confidence: f64) -> Self {
        Self {
            class: FaultClass::Normal,
            position_m: None,
            loss_db_est: 0.0,
            confidence,
        }
    }
}

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

pub fn linear_to_db(p: f64) -> Result<f64> {
    if p > 0.0 && p.is_finite() {
        Ok(10.0 * p.log10())
    } else {
        Err(Error::InvalidArgument(format!(
            "linear power must be positive and finite, got {p}"
        )))
    }
}

/// Spatial extent of the probe pulse, `c·T / (2·n_g)`, in metres.
pub fn pulse_spatial_width(config: &AcquisitionConfig) -> f64 {
    SPEED_OF_LIGHT * config.pulse_width_ns * 1e-9 / (2.0 * config.group_index)
}

pub fn validate_scenario(s: &FiberScenario) -> std::result::Result<(), Vec<Violation>> {
    let mut out = s.config.violations();
    let range = s.config.range_m;
    let width = pulse_spatial_width(&s.config);

    for e in &s.events {
        let name = format!("{:?}", e.kind).to_lowercase();
        if ![e.position_m, e.loss_db, e.reflectance_spike_db, e.extent_m]
            .iter()
            .all(|v| v.is_finite())
        {
            out.push(Violation::new(format!(
                "{name} event has non-finite fields"
            )));
            continue;
        }
        if e.loss_db < 0.0 {
            out.push(Violation::new(format!(
                "{name} loss_db must be nonnegative"
            )));
        }
        if e.extent_m < 0.0 {
            out.push(Violation::new(format!(
                "{name} extent_m must be nonnegative"
            )));
        }
        match e.kind {
            EventKind::Splice | EventKind::Bend => {
                if e.reflectance_spike_db != 0.0 {
                    out.push(Violation::new(format!("{name} must be non-reflective")));
                }
            }
            EventKind::Connector | EventKind::FiberEnd => {
                if e.reflectance_spike_db <= 0.0 {
                    out.push(Violation::new(format!("{name} must be reflective")));
                }
            }
        }
        if matches!(e.kind, EventKind::Splice | EventKind::Connector) && e.extent_m != 0.0 {
            out.push(Violation::new(format!("{name} must have zero extent")));
        }
        let in_range = if e.kind == EventKind::FiberEnd {
            e.position_m >= 0.0 && e.position_m <= range
        } else {
            e.position_m >= 0.0 && e.position_m < range
        };
        if !in_range {
            out.push(Violation::new(format!(
                "{name} position outside fiber range"
            )));
        }
    }

    for pair in s.events.windows(2) {
        if pair[1].position_m <= pair[0].position_m {
            out.push(Violation::new("events not sorted"));
        } else if pair[1].position_m - pair[0].position_m < 2.0 * width {
            out.push(Violation::new(
                "events closer than two pulse spatial widths",
            ));
        }
        if pair[0].kind == EventKind::FiberEnd {
            out.push(Violation::new("events after fiber end"));
        }
    }

    out.extend(s.label.violations(range));

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn splice_scenario() -> FiberScenario {
        FiberScenario {
            config: AcquisitionConfig::default(),
            events: vec![FiberEvent::splice(3000.0, 0.5)],
            label: FaultLabel::fault(FaultClass::Splice, 3000.0),
        }
    }

    #[test]
    fn db_conversions() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert_eq!(db_to_linear(10.0), 10.0);
        // 10^-0.3 evaluated at 30 digits: 0.501187233627272285...
        assert!((db_to_linear(-3.0) - 0.501_187_233_627_272_3).abs() < 1e-15);
        assert_eq!(linear_to_db(1.0).unwrap(), 0.0);
        assert_eq!(linear_to_db(100.0).unwrap(), 20.0);
        assert!((linear_to_db(0.5011872).unwrap() + 3.0).abs() < 1e-6);
        assert!(linear_to_db(0.0).is_err());
        assert!(linear_to_db(-1.0).is_err());
        assert!(linear_to_db(f64::NAN).is_err());
    }

    #[test]
    fn pulse_width_examples() {
        let mut c = AcquisitionConfig::default();
        // c·T/(2n) = 299792458·1e-8/2.936
        assert!((pulse_spatial_width(&c) - 1.021_091_478_201_635).abs() < 1e-9);
        c.pulse_width_ns = 100.0;
        assert!((pulse_spatial_width(&c) - 10.210_914_782_016_35).abs() < 1e-8);
        c.pulse_width_ns = 0.0;
        assert!(!c.violations().is_empty());
    }

    #[test]
    fn valid_splice_scenario_accepted() {
        assert_eq!(validate_scenario(&splice_scenario()), Ok(()));
    }

    #[test]
    fn unsorted_events_rejected() {
        let mut s = splice_scenario();
        s.events.push(FiberEvent::splice(2999.0, 0.2));
        let v = validate_scenario(&s).unwrap_err();
        assert!(v.iter().any(|x| x.reason == "events not sorted"), "{v:?}");
    }

    #[test]
    fn reflective_splice_rejected() {
        let mut s = splice_scenario();
        s.events[0].reflectance_spike_db = 1.0;
        let v = validate_scenario(&s).unwrap_err();
        assert!(
            v.iter()
                .any(|x| x.reason == "splice must be non-reflective"),
            "{v:?}"
        );
    }

    #[test]
    fn config_and_label_violations_collected() {
        let mut s = splice_scenario();
        s.config.group_index = 2.5;
        s.config.noise_floor_db = 40.0;
        s.label.position_m = None;
        s.events.push(FiberEvent::connector(3001.0, 0.5, 0.0));
        let v = validate_scenario(&s).unwrap_err();
        assert!(v.len() >= 5, "{v:?}");
    }

    #[test]
    fn fiber_end_may_sit_at_range() {
        let mut s = splice_scenario();
        s.events.push(FiberEvent::fiber_end(10_000.0, 4.0));
        assert_eq!(validate_scenario(&s), Ok(()));
        s.events.push(FiberEvent::splice(10_000.0 - 0.5, 0.1));
        assert!(validate_scenario(&s).is_err());
    }

    #[test]
    fn scenario_json_uses_field_names() {
        let json = serde_json::to_value(splice_scenario()).unwrap();
        assert_eq!(json["events"][0]["kind"], "Splice");
        assert_eq!(json["label"]["class"], "Splice");
        assert_eq!(json["label"]["position_m"], 3000.0);
        assert!(json["config"]["attenuation_db_per_km"].is_number());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn db_round_trip(exp in -12.0f64..12.0, mant in 1.0f64..10.0) {
                let p = mant * 10f64.powf(exp);
                let back = db_to_linear(linear_to_db(p).unwrap());
                prop_assert!(((back - p) / p).abs() <= 1e-12);
            }

            #[test]
            fn pulse_width_monotone(t in 0.1f64..1000.0, dt in 0.01f64..10.0, n in 1.0f64..1.9, dn in 0.001f64..0.1) {
                let mut a = AcquisitionConfig { pulse_width_ns: t, group_index: n, ..Default::default() };
                let w0 = pulse_spatial_width(&a);
                a.pulse_width_ns = t + dt;
                prop_assert!(pulse_spatial_width(&a) > w0);
                a.pulse_width_ns = t;
                a.group_index = n + dn;
                prop_assert!(pulse_spatial_width(&a) < w0);
            }
        }
    }
}
