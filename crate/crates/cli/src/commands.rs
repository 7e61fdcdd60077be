//! `train`, `eval`, `bench`, `validate` and `synth`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use zspeedl::bench::{bench_batch, bench_classification, write_report, BenchEntry, BenchReport};
use zspeedl::data::synth::{synthetic_bundle, SyntheticSpec};
use zspeedl::data::{load_manifest, view_split, write_bundle, DatasetBundle, SplitPart};
use zspeedl::eval::{gzsl_eval, mca, percent};
use zspeedl::methods::{load_model, save_model, Candidates, ModelHeader, ZslModel};
use zspeedl::ZslError;

use crate::hp::{fit_method, Hyperparameters};
use crate::{BenchArgs, CliError, CliResult, EvalArgs, Setting, SynthArgs, TrainArgs, ValidateArgs};

/// Result of one evaluation; accuracies are percentages with two decimals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub method: String,
    pub backbone: String,
    pub dataset: String,
    pub setting: Setting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mca: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, Value>,
    #[serde(default)]
    pub seed: u64,
}

/// Scores as fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scores {
    Zsl { mca: f64 },
    Gzsl { u: f64, s: f64, h: f64 },
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable");
    serde_json::to_string_pretty(&v).expect("value serializes") + "\n"
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn check_compatible(model: &ZslModel, bundle: &DatasetBundle) -> CliResult<()> {
    if model.feature_dim() != bundle.feature_dim() {
        return Err(ZslError::Dimension(format!(
            "model expects {} features, dataset `{}` has {}",
            model.feature_dim(),
            bundle.name,
            bundle.feature_dim()
        ))
        .into());
    }
    if let Some(a) = model.attribute_dim().filter(|&a| a != bundle.attribute_dim()) {
        return Err(ZslError::Dimension(format!(
            "model expects {a} attributes, dataset `{}` has {}",
            bundle.name,
            bundle.attribute_dim()
        ))
        .into());
    }
    Ok(())
}

/// ZSL scores unseen test rows against unseen candidates only; GZSL scores
/// both test partitions against every class.
pub fn evaluate(model: &ZslModel, bundle: &DatasetBundle, setting: Setting) -> CliResult<Scores> {
    check_compatible(model, bundle)?;
    let split = &bundle.split;
    match setting {
        Setting::Zsl => {
            let cand = Candidates::from_bundle(bundle, &split.unseen_classes)?;
            let (x, y) = view_split(bundle, SplitPart::TestUnseen)?;
            let pred = model.predict_classes(&x, &cand)?;
            Ok(Scores::Zsl {
                mca: mca(&pred, &y, &split.unseen_classes)?,
            })
        }
        Setting::Gzsl => {
            if split.test_seen_idx.is_empty() {
                return Err(ZslError::EmptySplit("test_seen").into());
            }
            let cand = Candidates::from_bundle(bundle, &split.all_classes())?;
            let (xs, ys) = view_split(bundle, SplitPart::TestSeen)?;
            let (xu, yu) = view_split(bundle, SplitPart::TestUnseen)?;
            let ps = model.predict_classes(&xs, &cand)?;
            let pu = model.predict_classes(&xu, &cand)?;
            let g = gzsl_eval(&ps, &ys, &pu, &yu, &split.seen_classes, &split.unseen_classes)?;
            Ok(Scores::Gzsl {
                u: g.acc_unseen,
                s: g.acc_seen,
                h: g.harmonic_mean,
            })
        }
    }
}

impl EvalResult {
    pub fn new(header: &ModelHeader, bundle: &DatasetBundle, setting: Setting, scores: Scores) -> Self {
        let mut r = EvalResult {
            method: header.method.to_string(),
            backbone: bundle.backbone_tag.clone(),
            dataset: bundle.name.clone(),
            setting,
            mca: None,
            u: None,
            s: None,
            h: None,
            hyperparameters: header.hyperparameters.clone(),
            seed: header.seed,
        };
        match scores {
            Scores::Zsl { mca } => r.mca = Some(percent(mca)),
            Scores::Gzsl { u, s, h } => {
                r.u = Some(percent(u));
                r.s = Some(percent(s));
                r.h = Some(percent(h));
            }
        }
        r
    }
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let hp = Hyperparameters::parse(a.method, &a.hp)?;
    let bundle = load_manifest(&a.dataset)?;
    log::info!(
        "training {} on `{}` ({} x {})",
        a.method,
        bundle.name,
        bundle.n_instances(),
        bundle.feature_dim()
    );
    let trained = fit_method(a.method, &hp, &bundle, a.seed)?;
    let mut header = ModelHeader::new(&trained.model, a.seed, bundle.manifest_hash.clone());
    header.hyperparameters = trained.hyperparameters;
    header.extras.insert("dataset".into(), json!(bundle.name));
    header.extras.insert("backbone".into(), json!(bundle.backbone_tag));
    if let Some(Value::Object(v)) = trained.validation {
        header.extras.extend(v);
    }
    save_model(&a.out, &trained.model, &header)?;
    let mut summary = json!({
        "model": a.out.display().to_string(),
        "method": a.method.to_string(),
        "hyperparameters": header.hyperparameters,
        "seed": a.seed,
    });
    if let Some(v) = header.extras.get("val_mca") {
        summary["val_mca"] = v.clone();
    }
    print!("{}", to_json(&summary));
    Ok(())
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    let (model, header) = load_model(&a.model)?;
    let bundle = load_manifest(&a.dataset)?;
    if !header.train_manifest_hash.is_empty() && header.train_manifest_hash != bundle.manifest_hash {
        log::warn!("model was trained on a different manifest than `{}`", a.dataset.display());
    }
    let scores = evaluate(&model, &bundle, a.setting)?;
    let json = to_json(&EvalResult::new(&header, &bundle, a.setting, scores));
    match &a.out {
        Some(path) => write_text(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

pub fn bench(a: &BenchArgs) -> CliResult<()> {
    let bundle = load_manifest(&a.dataset)?;
    let models = a
        .model
        .iter()
        .map(|dir| load_model(dir).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    let created_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let mut report = BenchReport::new(&a.device_label, &created_at);
    for (model, header) in &models {
        check_compatible(model, &bundle)?;
        let (method, stats) = match a.batch {
            None => (
                header.method.to_string(),
                bench_classification(model, &bundle, a.warmup, a.repeats, &a.device_label)?,
            ),
            Some(n) => (
                format!("{}[batch={n}]", header.method),
                bench_batch(model, &bundle, n, a.warmup, a.repeats, &a.device_label)?,
            ),
        };
        log::info!("{method} on {}: {} ms", bundle.backbone_tag, stats.cell(3));
        report.entries.push(BenchEntry {
            method,
            backbone_tag: bundle.backbone_tag.clone(),
            feature_dim: bundle.feature_dim(),
            stats,
        });
    }
    write_report(&report, &a.out, a.csv.as_deref())?;
    println!("{}", a.out.display());
    Ok(())
}

pub fn validate(a: &ValidateArgs) -> CliResult<()> {
    let b = load_manifest(&a.dataset)?;
    let s = &b.split;
    let summary = json!({
        "name": b.name,
        "backbone_tag": b.backbone_tag,
        "n_instances": b.n_instances(),
        "feature_dim": b.feature_dim(),
        "attribute_dim": b.attribute_dim(),
        "n_classes": b.n_classes(),
        "seen_classes": s.seen_classes.len(),
        "unseen_classes": s.unseen_classes.len(),
        "train": s.train_idx.len(),
        "test_seen": s.test_seen_idx.len(),
        "test_unseen": s.test_unseen_idx.len(),
        "val": s.val_idx.len(),
        "manifest_sha256": b.manifest_hash,
    });
    print!("{}", to_json(&summary));
    Ok(())
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    if a.classes < 2 || a.unseen == 0 || a.unseen >= a.classes {
        return Err(CliError::Usage(format!(
            "need at least one seen and one unseen class (classes {}, unseen {})",
            a.classes, a.unseen
        )));
    }
    if a.per_class < 5 || a.feature_dim == 0 || a.attribute_dim == 0 || !(a.noise >= 0.0) {
        return Err(CliError::Usage(
            "per-class must be at least 5, dimensions positive and noise nonnegative".into(),
        ));
    }
    let bundle = synthetic_bundle(&SyntheticSpec {
        name: a.name.clone(),
        backbone_tag: a.backbone_tag.clone(),
        n_classes: a.classes,
        n_unseen: a.unseen,
        per_class: a.per_class,
        feature_dim: a.feature_dim,
        attribute_dim: a.attribute_dim,
        noise: a.noise,
        seed: a.seed,
    });
    bundle.validate()?;
    let path = write_bundle(&bundle, &a.out)?;
    println!("{}", path.display());
    Ok(())
}
