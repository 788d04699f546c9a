//! File formats: trace CSV, JSON configs and weights, the JSONL dataset
//! manifest, and atomic writes.

use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classifier::{Cnn, ModelWeights};
use crate::error::{Error, Result};
use crate::plant::{validate_scenario, FaultClass, FaultLabel, FiberScenario, Trace};
use crate::synth::META_SPACING;

pub const TRACE_HEADER: &str = "distance_m,power_db";

/// CSV with `# key=value` metadata lines, a header, then one row per sample.
/// Numbers use the shortest representation that parses back to the same
/// `f64`.
pub fn trace_to_csv(t: &Trace) -> String {
    let mut s = String::with_capacity(t.len() * 24 + 256);
    s.push_str(&format!("# {META_SPACING}={}\n", t.spacing_m));
    for (k, v) in &t.meta {
        if k == META_SPACING {
            continue;
        }
        let clean = |x: &str| x.replace(['\n', '\r'], " ");
        s.push_str(&format!("# {}={}\n", clean(k).replace('=', ":"), clean(v)));
    }
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for (i, v) in t.samples.iter().enumerate() {
        s.push_str(&format!("{},{}\n", t.distance_at(i), v));
    }
    s
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{what} {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what} is not finite")));
    }
    Ok(v)
}

pub fn trace_from_csv(text: &str) -> Result<Trace> {
    let mut meta = std::collections::BTreeMap::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut header_seen = false;
    for (n, line) in lines.by_ref() {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if rest.is_empty() {
                continue;
            }
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| parse_err(n, "comment line is not key=value"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(parse_err(n, "empty metadata key"));
            }
            meta.insert(k.to_string(), v.trim().to_string());
        } else if line.trim().is_empty() {
            continue;
        } else if line.trim() == TRACE_HEADER {
            header_seen = true;
            break;
        } else {
            return Err(parse_err(n, format!("expected header {TRACE_HEADER:?}")));
        }
    }
    if !header_seen {
        return Err(parse_err(0, format!("missing header {TRACE_HEADER:?}")));
    }

    let mut dist = Vec::new();
    let mut samples = Vec::new();
    let mut rows_line = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (d, p) = line
            .split_once(',')
            .ok_or_else(|| parse_err(n, "row needs two comma-separated fields"))?;
        if p.contains(',') {
            return Err(parse_err(n, "row has more than two fields"));
        }
        dist.push(parse_f64(d, n, "distance")?);
        samples.push(parse_f64(p, n, "power")?);
        rows_line.push(n);
    }
    if samples.len() < 2 {
        return Err(parse_err(0, "trace needs at least two samples"));
    }

    let spacing = match meta.get(META_SPACING) {
        Some(s) => parse_f64(s, 0, "spacing_m")?,
        None => dist[1] - dist[0],
    };
    if !(spacing > 0.0) {
        return Err(parse_err(0, "sample spacing must be positive"));
    }
    for (i, (&d, &n)) in dist.iter().zip(&rows_line).enumerate() {
        let want = i as f64 * spacing;
        if (d - want).abs() > 1e-6 * want.abs().max(1.0) {
            return Err(parse_err(
                n,
                format!("distance {d} does not match uniform spacing {spacing} from 0"),
            ));
        }
    }
    meta.remove(META_SPACING);
    Ok(Trace {
        samples,
        spacing_m: spacing,
        meta,
    })
}

/// Deserialize JSON, reporting line and column on failure.
pub fn from_json<T: DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::json(context, &e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable value");
    s.push('\n');
    s
}

pub fn scenario_from_json(text: &str) -> Result<FiberScenario> {
    let s: FiberScenario = from_json(text, "scenario")?;
    validate_scenario(&s).map_err(Error::InvalidScenario)?;
    Ok(s)
}

pub fn weights_from_json(text: &str) -> Result<Cnn> {
    Cnn::from_weights(from_json::<ModelWeights>(text, "weights")?)
}

pub fn weights_to_json(model: &Cnn) -> String {
    to_json(&model.to_weights())
}

/// One line of the dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Path relative to the manifest's directory.
    pub trace: String,
    pub class: FaultClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_m: Option<f64>,
    pub seed: u64,
}

impl ManifestEntry {
    pub fn label(&self) -> FaultLabel {
        FaultLabel {
            class: self.class,
            position_m: self.position_m,
        }
    }
}

pub fn manifest_to_jsonl(entries: &[ManifestEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        s.push_str(&serde_json::to_string(e).expect("manifest entry serializes"));
        s.push('\n');
    }
    s
}

pub fn manifest_from_jsonl(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: ManifestEntry = serde_json::from_str(line).map_err(|err| Error::Json {
            context: "manifest".into(),
            line: i + 1,
            column: err.column(),
            message: err.to_string(),
        })?;
        let v = e.label().violations(f64::INFINITY);
        if let Some(first) = v.first() {
            return Err(parse_err(i + 1, first.to_string()));
        }
        if e.trace.is_empty() {
            return Err(parse_err(i + 1, "empty trace path"));
        }
        out.push(e);
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let wrap = |source| Error::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(bytes).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}
