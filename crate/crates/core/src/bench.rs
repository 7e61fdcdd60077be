//! Single-sample inference timing.
//!
//! Everything a prediction needs (candidate matrices, projected class
//! embeddings, scratch buffers) is built before the clock starts; the timed
//! region is one call of [`Prepared::classify`] on the calling thread.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{view_split, DatasetBundle, SplitPart};
use crate::error::{Result, ZslError};
use crate::methods::{Candidates, Prepared, ZslModel};

pub const DEFAULT_WARMUP: usize = 10;
pub const DEFAULT_REPEATS: usize = 100;

/// Mean, population standard deviation and minimum of the timed runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub avg_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    pub repeats: usize,
    pub warmup: usize,
    pub device_label: String,
}

impl TimingStats {
    pub fn from_samples(samples_ms: &[f64], warmup: usize, device_label: &str) -> Result<Self> {
        if samples_ms.is_empty() {
            return Err(ZslError::InvalidArgument("no timing samples".into()));
        }
        let n = samples_ms.len() as f64;
        let avg = samples_ms.iter().sum::<f64>() / n;
        let var = samples_ms.iter().map(|s| (s - avg) * (s - avg)).sum::<f64>() / n;
        let min = samples_ms.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(TimingStats {
            // the mean of equal samples can round just below their minimum
            avg_ms: avg.max(min),
            std_ms: var.sqrt(),
            min_ms: min,
            repeats: samples_ms.len(),
            warmup,
            device_label: device_label.to_string(),
        })
    }

    /// `avg ± std` with `digits` decimals.
    pub fn cell(&self, digits: usize) -> String {
        format!("{:.*} ± {:.*}", digits, self.avg_ms, digits, self.std_ms)
    }
}

/// Callbacks around every timed run. Tests use them to observe what happens
/// inside the measured region.
pub trait TimingHooks {
    fn enter(&mut self) {}
    fn exit(&mut self) {}
}

pub struct NoHooks;

impl TimingHooks for NoHooks {}

pub fn time_closure<R>(
    op: impl FnMut() -> Result<R>,
    warmup: usize,
    repeats: usize,
    device_label: &str,
) -> Result<TimingStats> {
    time_closure_with_hooks(op, warmup, repeats, device_label, &mut NoHooks)
}

pub fn time_closure_with_hooks<R>(
    mut op: impl FnMut() -> Result<R>,
    warmup: usize,
    repeats: usize,
    device_label: &str,
    hooks: &mut dyn TimingHooks,
) -> Result<TimingStats> {
    if repeats == 0 {
        return Err(ZslError::InvalidArgument("repeats must be at least 1".into()));
    }
    for _ in 0..warmup {
        black_box(op()?);
    }
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        hooks.enter();
        let start = Instant::now();
        let out = op();
        let elapsed = start.elapsed();
        hooks.exit();
        black_box(out?);
        samples.push(elapsed.as_secs_f64() * 1e3);
    }
    TimingStats::from_samples(&samples, warmup, device_label)
}

/// The timed unit of [`bench_classification`]: a prepared model over the
/// unseen candidates and one fixed test row.
pub struct ClassificationProbe {
    pub prepared: Box<dyn Prepared>,
    pub row: Vec<f64>,
}

impl ClassificationProbe {
    pub fn new(model: &ZslModel, bundle: &DatasetBundle) -> Result<Self> {
        let (x, _) = view_split(bundle, SplitPart::TestUnseen)?;
        let cand = Candidates::from_bundle(bundle, &bundle.split.unseen_classes)?;
        let prepared = model.prepare(&cand)?;
        if prepared.input_dim() != x.cols() {
            return Err(ZslError::Dimension(format!(
                "model expects {} features, dataset has {}",
                prepared.input_dim(),
                x.cols()
            )));
        }
        Ok(ClassificationProbe {
            prepared,
            row: x.row(0).to_vec(),
        })
    }

    pub fn classify(&mut self) -> usize {
        self.prepared.classify(black_box(&self.row))
    }
}

/// Per-sample latency of `model` on the first unseen test row, batch size 1.
pub fn bench_classification(
    model: &ZslModel,
    bundle: &DatasetBundle,
    warmup: usize,
    repeats: usize,
    device_label: &str,
) -> Result<TimingStats> {
    let mut probe = ClassificationProbe::new(model, bundle)?;
    time_closure(|| Ok(probe.classify()), warmup, repeats, device_label)
}

/// Latency of classifying `batch` unseen test rows in one timed run.
pub fn bench_batch(
    model: &ZslModel,
    bundle: &DatasetBundle,
    batch: usize,
    warmup: usize,
    repeats: usize,
    device_label: &str,
) -> Result<TimingStats> {
    if batch == 0 {
        return Err(ZslError::InvalidArgument("batch must be at least 1".into()));
    }
    let (x, _) = view_split(bundle, SplitPart::TestUnseen)?;
    let idx: Vec<usize> = (0..batch).map(|i| i % x.rows()).collect();
    let rows = x.select_rows(&idx);
    let cand = Candidates::from_bundle(bundle, &bundle.split.unseen_classes)?;
    let mut prepared = model.prepare(&cand)?;
    let mut out = vec![0usize; batch];
    time_closure(
        || {
            for (o, row) in out.iter_mut().zip(rows.row_iter()) {
                *o = prepared.classify(black_box(row));
            }
            Ok(out[batch - 1])
        },
        warmup,
        repeats,
        device_label,
    )
}

/// Frames per second of extraction followed by classification.
pub fn compose_fps(t_extract_ms: f64, t_classify_ms: f64) -> Result<f64> {
    if !(t_extract_ms >= 0.0 && t_classify_ms >= 0.0) || !t_extract_ms.is_finite() || !t_classify_ms.is_finite() {
        return Err(ZslError::InvalidArgument(format!(
            "timings must be finite and nonnegative, got {t_extract_ms} and {t_classify_ms}"
        )));
    }
    let total = t_extract_ms + t_classify_ms;
    if total == 0.0 {
        return Err(ZslError::InvalidArgument("total time is zero".into()));
    }
    Ok(1000.0 / total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub method: String,
    pub backbone_tag: String,
    pub feature_dim: usize,
    #[serde(flatten)]
    pub stats: TimingStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub toolkit_version: String,
    /// RFC 3339 timestamp.
    pub created_at: String,
    pub device_label: String,
    pub entries: Vec<BenchEntry>,
}

impl BenchReport {
    pub fn new(device_label: &str, created_at: &str) -> Self {
        BenchReport {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            created_at: created_at.to_string(),
            device_label: device_label.to_string(),
            entries: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        if self.entries.is_empty() {
            return Err(ZslError::InvalidArgument("benchmark report has no entries".into()));
        }
        // serde_json::Value keeps object keys sorted
        let value = serde_json::to_value(self).expect("report serializes");
        Ok(serde_json::to_string_pretty(&value).expect("value serializes") + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ZslError::Json {
            path: "<report>".into(),
            source: e,
        })
    }

    /// One row per method (first-appearance order), one `avg ± std` column per
    /// feature dimension (ascending); `-` where a pair was not measured.
    pub fn to_table_csv(&self) -> Result<String> {
        if self.entries.is_empty() {
            return Err(ZslError::InvalidArgument("benchmark report has no entries".into()));
        }
        let mut methods: Vec<&str> = Vec::new();
        let mut cells: BTreeMap<(&str, usize), &TimingStats> = BTreeMap::new();
        for e in &self.entries {
            if !methods.contains(&e.method.as_str()) {
                methods.push(&e.method);
            }
            cells.insert((&e.method, e.feature_dim), &e.stats);
        }
        let mut dims: Vec<usize> = self.entries.iter().map(|e| e.feature_dim).collect();
        dims.sort_unstable();
        dims.dedup();

        let mut out = String::from("method");
        for d in &dims {
            write!(out, ",{d}").unwrap();
        }
        out.push('\n');
        for m in methods {
            out.push_str(m);
            for &d in &dims {
                match cells.get(&(m, d)) {
                    Some(s) => write!(out, ",{}", s.cell(3)).unwrap(),
                    None => out.push_str(",-"),
                }
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Writes the JSON report and, when `csv_path` is given, the table layout.
pub fn write_report(r: &BenchReport, path: impl AsRef<Path>, csv_path: Option<&Path>) -> Result<()> {
    let path = path.as_ref();
    let json = r.to_json()?;
    fs::write(path, json).map_err(|e| ZslError::io(path, e))?;
    if let Some(csv) = csv_path {
        fs::write(csv, r.to_table_csv()?).map_err(|e| ZslError::io(csv, e))?;
    }
    Ok(())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<BenchReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ZslError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| ZslError::Json {
        path: path.to_path_buf(),
        source: e,
    })
}
