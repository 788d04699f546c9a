use std::path::{Path, PathBuf};
use std::time::Instant;

use otdr_core::baseline::{detect_threshold, ThresholdConfig};
use otdr_core::classifier::{
    infer_with, log_to_csv, sample_dataset, sample_item, train_with_progress, Cnn, CnnConfig,
    DatasetItem, EpochLog, SamplerConfig,
};
use otdr_core::eval::{benchmark_items, check_seed_disjoint, BenchmarkReport};
use otdr_core::geo::{locate_fault, RoutePolyline, RouteSpec};
use otdr_core::io::{
    from_json, manifest_from_jsonl, manifest_to_jsonl, read_text, scenario_from_json, to_json,
    trace_from_csv, trace_to_csv, weights_from_json, weights_to_json, write_atomic, ManifestEntry,
};
use otdr_core::plant::{AcquisitionConfig, Detection, FaultClass, Trace};
use otdr_core::synth::{
    clean_trace, noisy_trace, reference_scenarios, META_PULSE_WIDTH, META_SEED,
};
use otdr_core::{Error, Result};

use crate::{
    BenchArgs, CnnOverrides, DatasetArgs, DiagnoseArgs, EvalArgs, LocateArgs, SynthArgs,
    ThresholdArgs, TrainArgs,
};

const SAMPLER_FILE: &str = "sampler.json";
const ACQUISITION_FILE: &str = "acquisition.json";
const MANIFEST_FILE: &str = "manifest.jsonl";
const DEFAULT_TEST_N: usize = 1500;
const DEFAULT_TEST_SEED: u64 = 2;

fn load_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    from_json(&read_text(path)?, &format!("{what} {}", path.display()))
}

fn load_or_default<T: serde::de::DeserializeOwned + Default>(
    p: &Option<PathBuf>,
    what: &str,
) -> Result<T> {
    match p {
        Some(p) => load_json(p, what),
        None => Ok(T::default()),
    }
}

fn load_acquisition(p: &Option<PathBuf>) -> Result<AcquisitionConfig> {
    let a: AcquisitionConfig = load_or_default(p, "acquisition config")?;
    a.validate()?;
    Ok(a)
}

fn load_weights(p: &Path) -> Result<Cnn> {
    weights_from_json(&read_text(p)?).map_err(|e| match e {
        Error::Json {
            line,
            column,
            message,
            ..
        } => Error::Json {
            context: format!("weights {}", p.display()),
            line,
            column,
            message,
        },
        other => other,
    })
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|source| Error::Write {
        path: p.to_path_buf(),
        source,
    })
}

fn thresholds(args: &ThresholdArgs, base: ThresholdConfig) -> Result<ThresholdConfig> {
    let mut t = match &args.thresholds {
        Some(p) => load_json(p, "threshold config")?,
        None => base,
    };
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut t.window_m, args.window_m);
    set(&mut t.loss_cutoff_db, args.loss_cutoff_db);
    set(&mut t.spike_cutoff_db, args.spike_cutoff_db);
    set(&mut t.bend_loss_cutoff_db, args.bend_loss_cutoff_db);
    set(&mut t.guard_m, args.guard_m);
    set(&mut t.spike_width_m, args.spike_width_m);
    set(&mut t.event_span_m, args.event_span_m);
    Ok(t)
}

fn cnn_config(o: &CnnOverrides) -> Result<CnnConfig> {
    let mut c: CnnConfig = load_or_default(&o.cnn_config, "CNN config")?;
    if let Some(e) = o.epochs {
        c.epochs = e;
    }
    if let Some(s) = o.init_seed {
        c.init_seed = s;
    }
    if o.no_augment {
        c.augment = false;
    }
    c.validate()?;
    Ok(c)
}

fn describe(d: &Detection) -> String {
    match (d.class, d.position_m) {
        (FaultClass::Normal, _) | (_, None) => {
            format!("no fault (confidence {:.3})", d.confidence)
        }
        (c, Some(p)) => format!(
            "{c} at {p:.2} m, loss {:.3} dB, confidence {:.3}",
            d.loss_db_est, d.confidence
        ),
    }
}

fn progress(total: usize) -> impl FnMut(&EpochLog) {
    move |e: &EpochLog| {
        eprintln!(
            "epoch {}/{total}: train_loss={:.5} val_loss={:.5} val_acc={:.4}",
            e.epoch, e.train_loss, e.val_loss, e.val_acc
        )
    }
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut s = match (&a.scenario, a.reference) {
        (Some(p), _) => scenario_from_json(&read_text(p)?)?,
        (None, Some(k)) => reference_scenarios().swap_remove(k as usize),
        (None, None) => unreachable!("clap requires a source"),
    };
    if let Some(seed) = a.seed {
        s.config.rng_seed = seed;
    }
    let t = if a.clean {
        clean_trace(&s)?
    } else {
        noisy_trace(&s)?
    };
    write_atomic(&a.out, trace_to_csv(&t).as_bytes())?;
    println!("seeds: rng_seed={}", s.config.rng_seed);
    println!(
        "wrote {} ({} samples, {}, {})",
        a.out.display(),
        t.len(),
        if a.clean { "clean" } else { "noisy" },
        otdr_core::synth::scenario_id(&s)
    );
    Ok(())
}

pub fn dataset(a: DatasetArgs) -> Result<()> {
    let acq = load_acquisition(&a.acquisition)?;
    let mut cfg: SamplerConfig = load_or_default(&a.config, "sampler config")?;
    if let Some(n) = a.n {
        cfg.n_traces = n;
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    cfg.validate(&acq)?;
    println!("seeds: master_seed={}", cfg.master_seed);

    let traces_dir = a.out.join("traces");
    create_dir(&traces_dir)?;
    let mut entries = Vec::with_capacity(cfg.n_traces);
    for i in 0..cfg.n_traces {
        let item = sample_item(&cfg, &acq, i as u64)?;
        let rel = format!("traces/{i:06}.csv");
        write_atomic(&a.out.join(&rel), trace_to_csv(&item.trace).as_bytes())?;
        entries.push(ManifestEntry {
            trace: rel,
            class: item.label.class,
            position_m: item.label.position_m,
            seed: item.seed,
        });
    }
    write_atomic(
        &a.out.join(MANIFEST_FILE),
        manifest_to_jsonl(&entries).as_bytes(),
    )?;
    write_atomic(&a.out.join(SAMPLER_FILE), to_json(&cfg).as_bytes())?;
    write_atomic(&a.out.join(ACQUISITION_FILE), to_json(&acq).as_bytes())?;

    let mut counts = [0usize; 4];
    for e in &entries {
        counts[e.class.index()] += 1;
    }
    println!(
        "wrote {} traces to {} (Normal {}, Splice {}, Bend {}, Connector {})",
        entries.len(),
        a.out.display(),
        counts[0],
        counts[1],
        counts[2],
        counts[3]
    );
    Ok(())
}

fn load_dataset(manifest: &Path) -> Result<Vec<DatasetItem>> {
    let entries = manifest_from_jsonl(&read_text(manifest)?)?;
    if entries.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "manifest {} lists no traces",
            manifest.display()
        )));
    }
    let base = manifest.parent().unwrap_or(Path::new("."));
    entries
        .iter()
        .map(|e| {
            let path = base.join(&e.trace);
            let trace = trace_from_csv(&read_text(&path)?).map_err(|err| match err {
                Error::Parse { line, message } => Error::Parse {
                    line,
                    message: format!("{}: {message}", path.display()),
                },
                other => other,
            })?;
            Ok(DatasetItem {
                trace,
                label: e.label(),
                seed: e.seed,
            })
        })
        .collect()
}

pub fn train(a: TrainArgs) -> Result<()> {
    let cfg = cnn_config(&a.cnn)?;
    let items = load_dataset(&a.manifest)?;
    let sampler_path = a
        .manifest
        .parent()
        .unwrap_or(Path::new("."))
        .join(SAMPLER_FILE);
    let train_master_seed = if sampler_path.exists() {
        Some(load_json::<SamplerConfig>(&sampler_path, "sampler config")?.master_seed)
    } else {
        None
    };
    match train_master_seed {
        Some(s) => println!("seeds: init_seed={} master_seed={s}", cfg.init_seed),
        None => println!("seeds: init_seed={} master_seed=unknown", cfg.init_seed),
    }

    let outcome = train_with_progress(&items, &cfg, progress(cfg.epochs))?;
    let mut model = outcome.model;
    model.train_master_seed = train_master_seed;
    let log_path = a
        .log
        .clone()
        .unwrap_or_else(|| a.out.with_extension("log.csv"));
    write_atomic(&a.out, weights_to_json(&model).as_bytes())?;
    write_atomic(&log_path, log_to_csv(&outcome.log).as_bytes())?;
    println!(
        "best validation accuracy {:.4} at epoch {} ({} train / {} validation traces)",
        outcome.best_val_acc,
        outcome.best_epoch,
        outcome.train_indices.len(),
        outcome.val_indices.len()
    );
    println!("wrote {} and {}", a.out.display(), log_path.display());
    Ok(())
}

fn write_report(r: &BenchmarkReport, json: &Path, table: &Path) -> Result<()> {
    write_atomic(json, r.to_json().as_bytes())?;
    write_atomic(table, r.to_table().as_bytes())?;
    print!("{}", r.to_table());
    println!("wrote {} and {}", json.display(), table.display());
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let acq = load_acquisition(&a.acquisition)?;
    let model = load_weights(&a.weights)?;
    let mut cfg: SamplerConfig = match &a.config {
        Some(p) => load_json(p, "sampler config")?,
        None => SamplerConfig {
            n_traces: DEFAULT_TEST_N,
            master_seed: DEFAULT_TEST_SEED,
            ..Default::default()
        },
    };
    if let Some(n) = a.n {
        cfg.n_traces = n;
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    cfg.validate(&acq)?;
    check_seed_disjoint(cfg.master_seed, model.train_master_seed)?;
    let th = thresholds(&a.thresholds, ThresholdConfig::for_acquisition(&acq))?;
    th.validate(acq.sample_spacing_m)?;
    println!(
        "seeds: test_master_seed={} train_master_seed={}",
        cfg.master_seed,
        model
            .train_master_seed
            .map_or("unknown".to_string(), |s| s.to_string())
    );

    let report = otdr_core::eval::run_benchmark(&cfg, &acq, &model, &th, a.tolerance_m)?;
    let table = a
        .table
        .clone()
        .unwrap_or_else(|| a.out.with_extension("txt"));
    write_report(&report, &a.out, &table)
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let started = Instant::now();
    let acq = load_acquisition(&a.acquisition)?;
    let cfg = cnn_config(&a.cnn)?;
    check_seed_disjoint(a.test_seed, Some(a.train_seed))?;
    let th = thresholds(&a.thresholds, ThresholdConfig::for_acquisition(&acq))?;
    th.validate(acq.sample_spacing_m)?;
    let train_cfg = SamplerConfig {
        n_traces: a.train_n,
        master_seed: a.train_seed,
        ..Default::default()
    };
    let test_cfg = SamplerConfig {
        n_traces: a.test_n,
        master_seed: a.test_seed,
        ..Default::default()
    };
    train_cfg.validate(&acq)?;
    test_cfg.validate(&acq)?;
    println!(
        "seeds: train_master_seed={} test_master_seed={} init_seed={}",
        a.train_seed, a.test_seed, cfg.init_seed
    );
    create_dir(&a.out)?;

    let train_set = sample_dataset(&train_cfg, &acq)?;
    eprintln!("synthesized {} training traces", train_set.len());
    let outcome = train_with_progress(&train_set, &cfg, progress(cfg.epochs))?;
    drop(train_set);
    let mut model = outcome.model;
    model.train_master_seed = Some(a.train_seed);
    write_atomic(
        &a.out.join("weights.json"),
        weights_to_json(&model).as_bytes(),
    )?;
    write_atomic(
        &a.out.join("train_log.csv"),
        log_to_csv(&outcome.log).as_bytes(),
    )?;
    println!(
        "best validation accuracy {:.4} at epoch {}",
        outcome.best_val_acc, outcome.best_epoch
    );

    let test_set = sample_dataset(&test_cfg, &acq)?;
    let mut report = benchmark_items(&test_set, &model, &th, a.tolerance_m)?;
    report.seeds.test_master_seed = Some(a.test_seed);
    report.dataset.base_noise_sigma_linear = Some(acq.noise_sigma_linear);
    write_report(
        &report,
        &a.out.join("report.json"),
        &a.out.join("report.txt"),
    )?;
    eprintln!("total time {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

/// Thresholds default to the trace's own pulse width when it is recorded.
fn trace_thresholds(t: &Trace) -> ThresholdConfig {
    let mut th = ThresholdConfig::default();
    if let Some(w) = t
        .meta
        .get(META_PULSE_WIDTH)
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|w| *w > 0.0 && w.is_finite())
    {
        th.spike_width_m = w;
        th.guard_m = 2.0 * w;
    }
    th
}

fn load_route(p: &Path) -> Result<RoutePolyline> {
    load_json::<RouteSpec>(p, "route")?.into_route()
}

pub fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let t = trace_from_csv(&read_text(&a.trace)?)?;
    let model = load_weights(&a.weights)?;
    let th = thresholds(&a.thresholds, trace_thresholds(&t))?;
    th.validate(t.spacing_m)?;
    let route = a.route.as_deref().map(load_route).transpose()?;
    match t.meta.get(META_SEED) {
        Some(s) => println!("seeds: rng_seed={s}"),
        None => println!("seeds: none recorded in trace"),
    }
    println!(
        "trace {}: {} samples, spacing {} m, range {} m",
        a.trace.display(),
        t.len(),
        t.spacing_m,
        t.range_m()
    );
    let results = [
        ("traditional thresholding", detect_threshold(&t, &th)?),
        ("proposed AI model", infer_with(&model, &t, &th)?),
    ];
    // Resolve every location before printing so a failure leaves no partial
    // report.
    let mut lines = Vec::new();
    for (name, d) in &results {
        lines.push(format!("{name}: {}", describe(d)));
        if let (Some(r), Some(p)) = (&route, d.position_m) {
            let c = locate_fault(r, p)?;
            lines.push(format!("  location: lat {:.7}, lon {:.7}", c.lat, c.lon));
        }
    }
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

pub fn locate(a: LocateArgs) -> Result<()> {
    let r = load_route(&a.route)?;
    let c = locate_fault(&r, a.distance)?;
    println!("seeds: none (deterministic)");
    println!("lat {:.9}, lon {:.9}", c.lat, c.lon);
    Ok(())
}
