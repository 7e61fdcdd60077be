//! Frames per second of extraction plus classification, joined on backbone.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use zspeedl::bench::{compose_fps, read_report, BenchEntry};

use crate::commands::{to_json, write_text, EvalResult};
use crate::{CliError, CliResult, FpsArgs};

/// Per-image extraction timing of one backbone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractTiming {
    pub backbone_tag: String,
    pub avg_ms: f64,
    #[serde(default)]
    pub std_ms: Option<f64>,
    #[serde(default)]
    pub repeats: Option<usize>,
    #[serde(default)]
    pub feature_dim: Option<usize>,
    #[serde(default)]
    pub device_label: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FpsRow {
    pub method: String,
    pub backbone_tag: String,
    pub device_label: String,
    pub extract_ms: f64,
    pub classify_ms: f64,
    pub fps: f64,
    pub accuracy: Option<EvalResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skipped {
    pub backbone_tag: String,
    pub reason: String,
}

pub const CSV_HEADER: [&str; 11] = [
    "method",
    "backbone_tag",
    "device_label",
    "extract_ms",
    "classify_ms",
    "fps",
    "dataset",
    "mca",
    "u",
    "s",
    "h",
];

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// A single object, a list, or an object holding an `entries` list.
fn entries<T: for<'de> Deserialize<'de>>(v: Value, path: &Path) -> CliResult<Vec<T>> {
    let list = match v {
        Value::Object(mut o) if o.contains_key("entries") => o.remove("entries").unwrap_or_default(),
        Value::Array(a) => Value::Array(a),
        other => Value::Array(vec![other]),
    };
    serde_json::from_value(list).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_extract_timings(path: &Path) -> CliResult<Vec<ExtractTiming>> {
    let list: Vec<ExtractTiming> = entries(read_json(path)?, path)?;
    let mut seen = BTreeSet::new();
    for t in &list {
        if !seen.insert(&t.backbone_tag) {
            return Err(CliError::Data(format!(
                "{}: backbone `{}` appears more than once",
                path.display(),
                t.backbone_tag
            )));
        }
    }
    Ok(list)
}

pub fn read_accuracy(path: &Path) -> CliResult<Vec<EvalResult>> {
    entries(read_json(path)?, path)
}

/// Joins every classification entry with the extraction timing of its
/// backbone. Tags present on one side only are returned as skipped.
pub fn join(
    extract: &[ExtractTiming],
    classify: &[BenchEntry],
    accuracy: &[EvalResult],
) -> CliResult<(Vec<FpsRow>, Vec<Skipped>)> {
    let by_tag: BTreeMap<&str, &ExtractTiming> = extract.iter().map(|t| (t.backbone_tag.as_str(), t)).collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut used = BTreeSet::new();
    for e in classify {
        let Some(t) = by_tag.get(e.backbone_tag.as_str()) else {
            if !skipped.iter().any(|s: &Skipped| s.backbone_tag == e.backbone_tag) {
                skipped.push(Skipped {
                    backbone_tag: e.backbone_tag.clone(),
                    reason: "no extraction timing".into(),
                });
            }
            continue;
        };
        used.insert(t.backbone_tag.as_str());
        let fps = compose_fps(t.avg_ms, e.stats.avg_ms)?;
        let base = FpsRow {
            method: e.method.clone(),
            backbone_tag: e.backbone_tag.clone(),
            device_label: e.stats.device_label.clone(),
            extract_ms: t.avg_ms,
            classify_ms: e.stats.avg_ms,
            fps,
            accuracy: None,
        };
        let matches: Vec<&EvalResult> = accuracy
            .iter()
            .filter(|a| a.method == e.method && a.backbone == e.backbone_tag)
            .collect();
        if matches.is_empty() {
            rows.push(base);
        } else {
            rows.extend(matches.into_iter().map(|a| FpsRow {
                accuracy: Some(a.clone()),
                ..base.clone()
            }));
        }
    }
    for t in extract {
        if !used.contains(t.backbone_tag.as_str()) {
            skipped.push(Skipped {
                backbone_tag: t.backbone_tag.clone(),
                reason: "no classification timing".into(),
            });
        }
    }
    Ok((rows, skipped))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

pub fn to_csv(rows: &[FpsRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(CSV_HEADER).map_err(fail)?;
    for r in rows {
        let acc = r.accuracy.as_ref();
        w.write_record([
            r.method.clone(),
            r.backbone_tag.clone(),
            r.device_label.clone(),
            format!("{:.3}", r.extract_ms),
            format!("{:.3}", r.classify_ms),
            format!("{:.3}", r.fps),
            acc.map(|a| a.dataset.clone()).unwrap_or_default(),
            cell(acc.and_then(|a| a.mca)),
            cell(acc.and_then(|a| a.u)),
            cell(acc.and_then(|a| a.s)),
            cell(acc.and_then(|a| a.h)),
        ])
        .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn fps(a: &FpsArgs) -> CliResult<()> {
    let extract = read_extract_timings(&a.extract)?;
    let classify = read_report(&a.classify)?;
    let accuracy = match &a.accuracy {
        Some(p) => read_accuracy(p)?,
        None => Vec::new(),
    };
    let (rows, skipped) = join(&extract, &classify.entries, &accuracy)?;
    for s in &skipped {
        eprintln!("skipped backbone `{}`: {}", s.backbone_tag, s.reason);
    }
    write_text(&a.out, &to_csv(&rows)?)?;
    print!(
        "{}",
        to_json(&json!({ "out": a.out.display().to_string(), "rows": rows.len(), "skipped": skipped }))
    );
    Ok(())
}
