//! Metrics and the side-by-side benchmark of the threshold detector and the
//! CNN.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::{detect_threshold, ThresholdConfig};
use crate::classifier::{infer_with, sample_dataset, Cnn, DatasetItem, SamplerConfig};
use crate::error::{Error, Result};
use crate::plant::{AcquisitionConfig, Detection, FaultClass, FaultLabel};

pub const BASELINE_KEY: &str = "traditional_thresholding";
pub const CNN_KEY: &str = "proposed_ai_model";

/// Row labels of the text table, in order.
pub const TABLE_ROWS: [&str; 4] = [
    "Detection Accuracy",
    "False Positive Rate",
    "Average Localization Error",
    "Average Fault Detection Time",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub detection_accuracy: f64,
    /// Over true-Normal traces only; absent when there are none.
    pub false_positive_rate: Option<f64>,
    /// Over traces whose true and predicted class agree and are not Normal.
    pub mean_localization_error_m: Option<f64>,
    /// Fraction of the localized traces within the position tolerance.
    pub within_tolerance_rate: Option<f64>,
    /// `confusion[true][predicted]`, classes in Normal, Splice, Bend,
    /// Connector order.
    pub confusion: [[usize; 4]; 4],
}

pub fn score(
    detections: &[Detection],
    labels: &[FaultLabel],
    position_tolerance_m: f64,
) -> Result<Scores> {
    if detections.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} detections for {} labels",
            detections.len(),
            labels.len()
        )));
    }
    let mut confusion = [[0usize; 4]; 4];
    let mut errors = Vec::new();
    for (d, l) in detections.iter().zip(labels) {
        confusion[l.class.index()][d.class.index()] += 1;
        if d.class == l.class && l.class != FaultClass::Normal {
            if let (Some(p), Some(q)) = (d.position_m, l.position_m) {
                errors.push((p - q).abs());
            }
        }
    }
    let n = labels.len();
    let correct: usize = (0..4).map(|k| confusion[k][k]).sum();
    let normals: usize = confusion[0].iter().sum();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Ok(Scores {
        detection_accuracy: if n == 0 {
            0.0
        } else {
            correct as f64 / n as f64
        },
        false_positive_rate: (normals > 0)
            .then(|| (normals - confusion[0][0]) as f64 / normals as f64),
        mean_localization_error_m: mean(&errors),
        within_tolerance_rate: (!errors.is_empty()).then(|| {
            errors
                .iter()
                .filter(|e| **e <= position_tolerance_m)
                .count() as f64
                / errors.len() as f64
        }),
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    #[serde(flatten)]
    pub scores: Scores,
    pub mean_latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub n_traces: usize,
    pub class_counts: [usize; 4],
    pub base_noise_sigma_linear: Option<f64>,
    pub range_m: f64,
    pub sample_spacing_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub test_master_seed: Option<u64>,
    pub train_master_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub dataset: DatasetDescriptor,
    pub seeds: Seeds,
    pub position_tolerance_m: f64,
    /// Accuracy counts class only; localization is scored separately.
    pub accuracy_definition: String,
    pub methods: BTreeMap<String, MethodReport>,
    pub environment: String,
}

impl BenchmarkReport {
    /// Pretty JSON with keys sorted at every level.
    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }

    /// Plain-text table with one column per method.
    pub fn to_table(&self) -> String {
        let cols = [
            ("Traditional Thresholding", self.methods.get(BASELINE_KEY)),
            ("Proposed AI Model", self.methods.get(CNN_KEY)),
        ];
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.1}%", 100.0 * x));
        let cell = |row: usize, m: Option<&MethodReport>| -> String {
            let Some(m) = m else { return "n/a".into() };
            match row {
                0 => pct(Some(m.scores.detection_accuracy)),
                1 => pct(m.scores.false_positive_rate),
                2 => m
                    .scores
                    .mean_localization_error_m
                    .map_or("n/a".into(), |e| format!("{e:.2} m")),
                _ => format!("{:.3} ms", 1e3 * m.mean_latency_s),
            }
        };
        let mut out = String::new();
        let _ = writeln!(out, "{:<30}{:>26}{:>20}", "Metric", cols[0].0, cols[1].0);
        for (r, name) in TABLE_ROWS.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<30}{:>26}{:>20}",
                name,
                cell(r, cols[0].1),
                cell(r, cols[1].1)
            );
        }
        out
    }
}

fn environment_note() -> String {
    format!(
        "{}-{}, single-threaded timing of preprocess+inference per trace",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

/// Refuses a test seed equal to the one the model was trained on.
pub fn check_seed_disjoint(test_master_seed: u64, train_master_seed: Option<u64>) -> Result<()> {
    if train_master_seed == Some(test_master_seed) {
        return Err(Error::InvalidConfig(format!(
            "test master_seed {test_master_seed} equals the training master_seed"
        )));
    }
    Ok(())
}

/// Synthesizes the test set from `sampler` and benchmarks both methods on it.
pub fn run_benchmark(
    sampler: &SamplerConfig,
    acq: &AcquisitionConfig,
    model: &Cnn,
    thresholds: &ThresholdConfig,
    position_tolerance_m: f64,
) -> Result<BenchmarkReport> {
    check_seed_disjoint(sampler.master_seed, model.train_master_seed)?;
    let items = sample_dataset(sampler, acq)?;
    let mut r = benchmark_items(&items, model, thresholds, position_tolerance_m)?;
    r.seeds.test_master_seed = Some(sampler.master_seed);
    r.dataset.base_noise_sigma_linear = Some(acq.noise_sigma_linear);
    Ok(r)
}

/// Benchmark on an already synthesized test set. Both detectors see the same
/// traces; each call is timed on its own.
pub fn benchmark_items(
    items: &[DatasetItem],
    model: &Cnn,
    thresholds: &ThresholdConfig,
    position_tolerance_m: f64,
) -> Result<BenchmarkReport> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("benchmark test set is empty".into()));
    }
    let labels: Vec<FaultLabel> = items.iter().map(|it| it.label).collect();
    let mut base = Vec::with_capacity(items.len());
    let mut cnn = Vec::with_capacity(items.len());
    let (mut t_base, mut t_cnn) = (0.0, 0.0);
    for it in items {
        let t0 = Instant::now();
        base.push(detect_threshold(&it.trace, thresholds)?);
        t_base += t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        cnn.push(infer_with(model, &it.trace, thresholds)?);
        t_cnn += t0.elapsed().as_secs_f64();
    }
    let n = items.len() as f64;
    let mut methods = BTreeMap::new();
    methods.insert(
        BASELINE_KEY.to_string(),
        MethodReport {
            scores: score(&base, &labels, position_tolerance_m)?,
            mean_latency_s: t_base / n,
        },
    );
    methods.insert(
        CNN_KEY.to_string(),
        MethodReport {
            scores: score(&cnn, &labels, position_tolerance_m)?,
            mean_latency_s: t_cnn / n,
        },
    );
    let mut class_counts = [0; 4];
    for l in &labels {
        class_counts[l.class.index()] += 1;
    }
    let first = &items[0].trace;
    Ok(BenchmarkReport {
        dataset: DatasetDescriptor {
            n_traces: items.len(),
            class_counts,
            base_noise_sigma_linear: None,
            range_m: first.range_m(),
            sample_spacing_m: first.spacing_m,
        },
        seeds: Seeds {
            test_master_seed: None,
            train_master_seed: model.train_master_seed,
        },
        position_tolerance_m,
        accuracy_definition: "4-class accuracy; position not gated".into(),
        methods,
        environment: environment_note(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(class: FaultClass, p: Option<f64>) -> Detection {
        Detection {
            class,
            position_m: p,
            loss_db_est: 0.0,
            confidence: 1.0,
        }
    }

    #[test]
    fn perfect_predictions() {
        let labels = vec![
            FaultLabel::normal(),
            FaultLabel::fault(FaultClass::Splice, 100.0),
            FaultLabel::fault(FaultClass::Connector, 900.0),
        ];
        let dets: Vec<_> = labels.iter().map(|l| det(l.class, l.position_m)).collect();
        let s = score(&dets, &labels, 5.0).unwrap();
        assert_eq!(s.detection_accuracy, 1.0);
        assert_eq!(s.false_positive_rate, Some(0.0));
        assert_eq!(s.mean_localization_error_m, Some(0.0));
    }

    #[test]
    fn all_normal_on_half_faulty_set() {
        let labels = vec![
            FaultLabel::normal(),
            FaultLabel::normal(),
            FaultLabel::fault(FaultClass::Bend, 10.0),
            FaultLabel::fault(FaultClass::Splice, 20.0),
        ];
        let dets = vec![det(FaultClass::Normal, None); 4];
        let s = score(&dets, &labels, 5.0).unwrap();
        assert_eq!(s.detection_accuracy, 0.5);
        assert_eq!(s.false_positive_rate, Some(0.0));
        assert_eq!(s.mean_localization_error_m, None);
    }

    #[test]
    fn denominators() {
        let labels = vec![
            FaultLabel::normal(),
            FaultLabel::normal(),
            FaultLabel::normal(),
            FaultLabel::normal(),
            FaultLabel::fault(FaultClass::Bend, 100.0),
            FaultLabel::fault(FaultClass::Bend, 200.0),
        ];
        let dets = vec![
            det(FaultClass::Splice, Some(5.0)),
            det(FaultClass::Normal, None),
            det(FaultClass::Normal, None),
            det(FaultClass::Normal, None),
            // Wrong class: no localization error counted.
            det(FaultClass::Splice, Some(1000.0)),
            det(FaultClass::Bend, Some(203.0)),
        ];
        let s = score(&dets, &labels, 2.0).unwrap();
        assert_eq!(s.false_positive_rate, Some(0.25));
        assert_eq!(s.mean_localization_error_m, Some(3.0));
        assert_eq!(s.within_tolerance_rate, Some(0.0));
        assert_eq!(s.confusion[0], [3, 1, 0, 0]);
        assert_eq!(s.confusion[2], [0, 1, 1, 0]);
        let rows: usize = s.confusion.iter().flatten().sum();
        assert_eq!(rows, 6);
    }

    #[test]
    fn permutation_invariant() {
        let labels = vec![
            FaultLabel::normal(),
            FaultLabel::fault(FaultClass::Bend, 100.0),
            FaultLabel::fault(FaultClass::Splice, 300.0),
        ];
        let dets = vec![
            det(FaultClass::Splice, Some(1.0)),
            det(FaultClass::Bend, Some(104.0)),
            det(FaultClass::Splice, Some(301.0)),
        ];
        let a = score(&dets, &labels, 5.0).unwrap();
        let order = [2, 0, 1];
        let d2: Vec<_> = order.iter().map(|&i| dets[i]).collect();
        let l2: Vec<_> = order.iter().map(|&i| labels[i]).collect();
        assert_eq!(a, score(&d2, &l2, 5.0).unwrap());
    }

    #[test]
    fn length_mismatch() {
        assert!(score(&[], &[FaultLabel::normal()], 1.0).is_err());
    }

    #[test]
    fn seed_collision_refused() {
        assert!(check_seed_disjoint(5, Some(5)).is_err());
        assert!(check_seed_disjoint(5, Some(6)).is_ok());
        assert!(check_seed_disjoint(5, None).is_ok());
    }
}
