use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{
    validate_scenario, AcquisitionConfig, FaultClass, FaultLabel, FiberEvent, FiberScenario, Trace,
};
use crate::seed::mix;
use crate::synth::noisy_trace;

/// Table-scale training set size.
pub const DEFAULT_TRACE_COUNT: usize = 7500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_traces: usize,
    /// Probabilities of Normal, Splice, Bend, Connector.
    pub class_mix: [f64; 4],
    pub position_range_m: (f64, f64),
    pub splice_loss_db: (f64, f64),
    pub bend_loss_db: (f64, f64),
    pub bend_extent_m: (f64, f64),
    pub connector_loss_db: (f64, f64),
    pub connector_spike_db: (f64, f64),
    /// Multiplier range applied to the acquisition's base noise sigma.
    pub noise_sigma_range: (f64, f64),
    pub master_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_traces: DEFAULT_TRACE_COUNT,
            class_mix: [0.25; 4],
            position_range_m: (500.0, 9500.0),
            splice_loss_db: (0.1, 1.0),
            bend_loss_db: (0.5, 3.0),
            bend_extent_m: (1.0, 20.0),
            connector_loss_db: (0.2, 1.5),
            connector_spike_db: (2.0, 10.0),
            noise_sigma_range: (0.5, 2.0),
            master_seed: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, acq: &AcquisitionConfig) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_traces == 0 {
            return bad("n_traces must be positive");
        }
        if self.class_mix.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("class_mix entries must be nonnegative");
        }
        if (self.class_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("class_mix must sum to 1");
        }
        let ranges = [
            ("position_range_m", self.position_range_m),
            ("splice_loss_db", self.splice_loss_db),
            ("bend_loss_db", self.bend_loss_db),
            ("bend_extent_m", self.bend_extent_m),
            ("connector_loss_db", self.connector_loss_db),
            ("connector_spike_db", self.connector_spike_db),
            ("noise_sigma_range", self.noise_sigma_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be a nonnegative range with min <= max"
                )));
            }
        }
        let (p0, p1) = self.position_range_m;
        if p0 <= 0.0 || p1 + self.bend_extent_m.1 >= acq.range_m {
            return bad("position_range_m must keep events inside the fiber");
        }
        if self.connector_spike_db.0 <= 0.0 {
            return bad("connector_spike_db must be positive");
        }
        acq.validate()
    }
}

/// One generated example.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub trace: Trace,
    pub label: FaultLabel,
    pub seed: u64,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Scenario for item `index`, derived only from `mix(master_seed, index)`.
pub fn sample_scenario(
    cfg: &SamplerConfig,
    acq: &AcquisitionConfig,
    index: u64,
) -> (FiberScenario, u64) {
    let seed = mix(cfg.master_seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut class = FaultClass::Connector;
    for (c, p) in FaultClass::ALL.iter().zip(cfg.class_mix) {
        acc += p;
        if u < acc {
            class = *c;
            break;
        }
    }
    let position = uniform(&mut rng, cfg.position_range_m);
    let event = match class {
        FaultClass::Normal => None,
        FaultClass::Splice => Some(FiberEvent::splice(
            position,
            uniform(&mut rng, cfg.splice_loss_db),
        )),
        FaultClass::Bend => {
            let loss = uniform(&mut rng, cfg.bend_loss_db);
            Some(FiberEvent::bend(
                position,
                loss,
                uniform(&mut rng, cfg.bend_extent_m),
            ))
        }
        FaultClass::Connector => {
            let loss = uniform(&mut rng, cfg.connector_loss_db);
            Some(FiberEvent::connector(
                position,
                loss,
                uniform(&mut rng, cfg.connector_spike_db),
            ))
        }
    };
    let sigma = acq.noise_sigma_linear * uniform(&mut rng, cfg.noise_sigma_range);
    let noise_seed: u64 = rng.random();

    let label = match event {
        Some(_) => FaultLabel::fault(class, position),
        None => FaultLabel::normal(),
    };
    let scenario = FiberScenario {
        config: AcquisitionConfig {
            noise_sigma_linear: sigma,
            rng_seed: noise_seed,
            ..acq.clone()
        },
        events: event.into_iter().collect(),
        label,
    };
    (scenario, seed)
}

pub fn sample_item(
    cfg: &SamplerConfig,
    acq: &AcquisitionConfig,
    index: u64,
) -> Result<DatasetItem> {
    let (scenario, seed) = sample_scenario(cfg, acq, index);
    validate_scenario(&scenario).map_err(Error::InvalidScenario)?;
    let mut trace = noisy_trace(&scenario)?;
    trace.meta.insert("item_seed".into(), seed.to_string());
    trace.meta.insert("item_index".into(), index.to_string());
    Ok(DatasetItem {
        trace,
        label: scenario.label,
        seed,
    })
}

/// `n_traces` labelled noisy traces. Item `i` depends only on
/// `(master_seed, i)`.
pub fn sample_dataset(cfg: &SamplerConfig, acq: &AcquisitionConfig) -> Result<Vec<DatasetItem>> {
    cfg.validate(acq)?;
    (0..cfg.n_traces as u64)
        .map(|i| sample_item(cfg, acq, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> SamplerConfig {
        SamplerConfig {
            n_traces: n,
            master_seed: 99,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_and_order_independent() {
        let acq = AcquisitionConfig::default();
        let cfg = small(20);
        let a = sample_dataset(&cfg, &acq).unwrap();
        let b = sample_dataset(&cfg, &acq).unwrap();
        assert_eq!(a, b);
        let solo = sample_item(&cfg, &acq, 13).unwrap();
        assert_eq!(solo, a[13]);
    }

    #[test]
    fn class_counts_are_reproducible() {
        let acq = AcquisitionConfig::default();
        let cfg = small(100);
        let counts = |cfg: &SamplerConfig| {
            let mut c = [0usize; 4];
            for i in 0..cfg.n_traces as u64 {
                c[sample_scenario(cfg, &acq, i).0.label.class.index()] += 1;
            }
            c
        };
        let c = counts(&cfg);
        assert_eq!(c.iter().sum::<usize>(), 100);
        assert_eq!(c, counts(&cfg));
        assert_eq!(c, [27, 33, 14, 26]);
    }

    #[test]
    fn positions_within_range() {
        let acq = AcquisitionConfig::default();
        let cfg = small(2000);
        for i in 0..2000 {
            let (s, _) = sample_scenario(&cfg, &acq, i);
            if let Some(p) = s.label.position_m {
                assert!((500.0..=9500.0).contains(&p));
            }
        }
    }

    #[test]
    fn table_scale_default() {
        assert_eq!(SamplerConfig::default().n_traces, 7500);
    }

    #[test]
    fn rejects_bad_mix() {
        let acq = AcquisitionConfig::default();
        let mut cfg = small(10);
        cfg.class_mix = [0.5, 0.5, 0.5, 0.0];
        assert!(matches!(cfg.validate(&acq), Err(Error::InvalidConfig(_))));
        cfg.class_mix = [1.0, 0.0, 0.0, 0.0];
        assert!(cfg.validate(&acq).is_ok());
        cfg.splice_loss_db = (1.0, 0.5);
        assert!(cfg.validate(&acq).is_err());
    }

    #[test]
    fn single_class_mix() {
        let acq = AcquisitionConfig::default();
        let mut cfg = small(50);
        cfg.class_mix = [0.0, 0.0, 0.0, 1.0];
        for i in 0..50 {
            assert_eq!(
                sample_scenario(&cfg, &acq, i).0.label.class,
                FaultClass::Connector
            );
        }
    }
}
