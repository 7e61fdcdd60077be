//! Train and evaluate every (method, dataset) pair into a Table-6-shaped CSV.
//!
//! Each finished cell is appended to a JSON-lines progress file as soon as it
//! completes; a rerun skips cells recorded there without an error.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zspeedl::data::load_manifest;
use zspeedl::eval::percent;
use zspeedl::methods::Method;

use crate::commands::{evaluate, write_text, Scores};
use crate::hp::{fit_method, Hyperparameters};
use crate::{CliError, CliResult, Setting, SweepArgs, SweepSetting};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: Method,
    pub manifest: String,
    pub setting: String,
    pub dataset: String,
    pub backbone: String,
    pub mca: Option<f64>,
    pub u: Option<f64>,
    pub s: Option<f64>,
    pub h: Option<f64>,
    pub error: Option<String>,
}

impl CellRecord {
    fn key(&self) -> (Method, String, String) {
        (self.method, self.manifest.clone(), self.setting.clone())
    }
}

pub const CSV_HEADER: [&str; 8] = ["method", "backbone", "dataset", "mca", "u", "s", "h", "error"];

fn setting_name(s: SweepSetting) -> &'static str {
    match s {
        SweepSetting::Zsl => "zsl",
        SweepSetting::Gzsl => "gzsl",
        SweepSetting::Both => "both",
    }
}

/// Splits `method:key=value` arguments into validated per-method sets.
pub fn parse_method_hps(args: &[String], methods: &[Method]) -> CliResult<HashMap<Method, Hyperparameters>> {
    let mut raw: HashMap<Method, Vec<String>> = HashMap::new();
    for a in args.iter().flat_map(|a| a.split(',')).filter(|a| !a.is_empty()) {
        let (m, kv) = a
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("sweep hyper-parameter `{a}` is not method:key=value")))?;
        let method: Method = m.parse().map_err(CliError::Usage)?;
        raw.entry(method).or_default().push(kv.to_string());
    }
    let mut out = HashMap::new();
    for &m in methods {
        out.insert(m, Hyperparameters::parse(m, raw.get(&m).map(Vec::as_slice).unwrap_or(&[]))?);
    }
    for m in raw.keys() {
        if !methods.contains(m) {
            return Err(CliError::Usage(format!("hyper-parameters given for {m}, which is not swept")));
        }
    }
    Ok(out)
}

pub fn read_progress(path: &Path) -> CliResult<Vec<CellRecord>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CliError::io(path, e)),
    };
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match serde_json::from_str::<CellRecord>(line) {
            Ok(r) => records.push(r),
            // an interrupted write leaves a partial last line
            Err(e) => log::warn!("{}:{}: ignoring unreadable progress line ({e})", path.display(), i + 1),
        }
    }
    Ok(records)
}

fn append_progress(path: &Path, r: &CellRecord) -> CliResult<()> {
    let torn = fs::read(path).is_ok_and(|b| b.last().is_some_and(|&c| c != b'\n'));
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    let line = serde_json::to_string(r).expect("record serializes");
    if torn {
        writeln!(f).map_err(|e| CliError::io(path, e))?;
    }
    writeln!(f, "{line}").map_err(|e| CliError::io(path, e))?;
    f.sync_data().map_err(|e| CliError::io(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

pub fn write_csv(path: &Path, rows: &[CellRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(CSV_HEADER).map_err(fail)?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.backbone.clone(),
            r.dataset.clone(),
            fmt_opt(r.mca),
            fmt_opt(r.u),
            fmt_opt(r.s),
            fmt_opt(r.h),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("csv is utf-8"))
}

fn run_cell(
    method: Method,
    hp: &Hyperparameters,
    bundle: &zspeedl::data::DatasetBundle,
    setting: SweepSetting,
    seed: u64,
    record: &mut CellRecord,
) -> CliResult<()> {
    let trained = fit_method(method, hp, bundle, seed)?;
    if matches!(setting, SweepSetting::Zsl | SweepSetting::Both) {
        if let Scores::Zsl { mca } = evaluate(&trained.model, bundle, Setting::Zsl)? {
            record.mca = Some(percent(mca));
        }
    }
    if matches!(setting, SweepSetting::Gzsl | SweepSetting::Both) {
        if let Scores::Gzsl { u, s, h } = evaluate(&trained.model, bundle, Setting::Gzsl)? {
            record.u = Some(percent(u));
            record.s = Some(percent(s));
            record.h = Some(percent(h));
        }
    }
    Ok(())
}

pub fn default_progress_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".progress.jsonl");
    PathBuf::from(p)
}

pub fn sweep(a: &SweepArgs) -> CliResult<()> {
    let hps = parse_method_hps(&a.hp, &a.method)?;
    let progress = a.progress.clone().unwrap_or_else(|| default_progress_path(&a.out));
    let setting = setting_name(a.setting);

    let mut done: BTreeMap<(Method, String, String), CellRecord> = BTreeMap::new();
    for r in read_progress(&progress)? {
        if r.error.is_none() && r.setting == setting {
            done.insert(r.key(), r);
        }
    }
    let manifests: Vec<String> = a.dataset.iter().map(|p| p.display().to_string()).collect();
    let pending = |m: &str| a.method.iter().any(|&me| !done.contains_key(&(me, m.to_string(), setting.to_string())));

    // every manifest with work left must load before anything is trained
    for (path, name) in a.dataset.iter().zip(&manifests) {
        if pending(name) {
            load_manifest(path)?;
        }
    }

    let mut cells: BTreeMap<(Method, String, String), CellRecord> = BTreeMap::new();
    for (path, name) in a.dataset.iter().zip(&manifests) {
        if !pending(name) {
            continue;
        }
        let bundle = load_manifest(path)?;
        for &method in &a.method {
            let key = (method, name.clone(), setting.to_string());
            if done.contains_key(&key) {
                log::info!("skipping completed cell {method} / {name}");
                continue;
            }
            let mut record = CellRecord {
                method,
                manifest: name.clone(),
                setting: setting.to_string(),
                dataset: bundle.name.clone(),
                backbone: bundle.backbone_tag.clone(),
                mca: None,
                u: None,
                s: None,
                h: None,
                error: None,
            };
            if let Err(e) = run_cell(method, &hps[&method], &bundle, a.setting, a.seed, &mut record) {
                log::warn!("{method} / {name} failed: {e}");
                record.error = Some(e.to_string());
            }
            append_progress(&progress, &record)?;
            cells.insert(key, record);
        }
    }

    let mut rows = Vec::new();
    for &method in &a.method {
        for name in &manifests {
            let key = (method, name.clone(), setting.to_string());
            if let Some(r) = done.get(&key).or_else(|| cells.get(&key)) {
                rows.push(r.clone());
            }
        }
    }
    write_csv(&a.out, &rows)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{} cells ({} computed, {} reused, {failed} failed) -> {}",
        rows.len(),
        cells.len(),
        rows.len() - cells.len(),
        a.out.display()
    );
    Ok(())
}
