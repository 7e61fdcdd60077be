use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use zspeedl::data::synth::{synthetic_bundle, SyntheticSpec};
use zspeedl::data::write_bundle;

fn zspeedl(args: &[&str]) -> Output {
    zspeedl_env(args, &[])
}

fn zspeedl_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_zspeedl"));
    cmd.args(args).env_remove("ZSPEEDL_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["synth", "--out", s(&out), "--backbone-tag", name];
    args.extend_from_slice(extra);
    let o = zspeedl(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out.join("manifest.json")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn train(dir: &TempDir, manifest: &Path, method: &str, hp: &[&str], name: &str) -> PathBuf {
    let out = dir.path().join(name);
    let mut args = vec!["train", "--dataset", s(manifest), "--method", method, "--out", s(&out)];
    for h in hp {
        args.extend(["--hp", h]);
    }
    let o = zspeedl(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn synth_then_validate() {
    let dir = TempDir::new().unwrap();
    let m = synth(dir.path(), "fx", &["--feature-dim", "12"]);
    let o = zspeedl(&["validate", "--dataset", s(&m)]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["feature_dim"], 12);
    assert_eq!(v["n_classes"], 6);

    fs::write(dir.path().join("fx/features.zspl"), b"ZSPL").unwrap();
    assert_eq!(code(&zspeedl(&["validate", "--dataset", s(&m)])), 2);
    assert_eq!(code(&zspeedl(&["validate", "--dataset", "/nonexistent/manifest.json"])), 2);
    assert_eq!(code(&zspeedl(&["synth", "--out", s(dir.path()), "--unseen", "6"])), 1);
}

#[test]
fn train_records_explicit_hyperparameters() {
    let dir = TempDir::new().unwrap();
    let m = synth(dir.path(), "fx", &[]);
    let model = train(&dir, &m, "eszsl", &["gamma=0.1,lambda=0.1"], "eszsl");
    let h = read_json(&model.join("header.json"));
    assert_eq!(h["method"], "eszsl");
    assert_eq!(h["hyperparameters"]["gamma"], 0.1);
    assert_eq!(h["hyperparameters"]["lambda"], 0.1);
    assert_eq!(h["seed"], 42);
    assert!(h["extras"].get("val_mca").is_none());
}

#[test]
fn train_without_lambda_runs_the_grid() {
    let dir = TempDir::new().unwrap();
    let m = synth(dir.path(), "fx", &[]);
    let model = train(&dir, &m, "sae", &[], "sae");
    let h = read_json(&model.join("header.json"));
    let lambda = h["hyperparameters"]["lambda"].as_f64().unwrap();
    assert!([0.05, 0.5, 5.0, 50.0, 500.0].contains(&lambda), "{lambda}");
    let val = h["extras"]["val_mca"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&val));
    let grid = h["extras"]["grid"].as_array().unwrap();
    assert_eq!(grid.len(), 5);
    let best = grid
        .iter()
        .filter_map(|p| p["val_mca"].as_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best, val);
}

#[test]
fn diverging_dem_exits_with_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let m = synth(dir.path(), "fx", &[]);
    let out = dir.path().join("dem");
    let o = zspeedl(&["train", "--dataset", s(&m), "--method", "dem", "--hp", "lr=1e3", "--out", s(&out)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite loss"), "{}", stderr(&o));
}

#[test]
fn hyperparameters_are_checked_before_loading_data() {
    let missing = "/nonexistent/manifest.json";
    for (method, hp) in [("eszsl", "hidden=3"), ("dem", "lr=fast"), ("eszsl", "gamma=1"), ("sae", "metric=l1")] {
        let o = zspeedl(&["train", "--dataset", missing, "--method", method, "--hp", hp, "--out", "/tmp/x"]);
        let expected = if hp == "gamma=1" { 2 } else { 1 };
        assert_eq!(code(&o), expected, "{method} {hp}: {}", stderr(&o));
    }
    let dir = TempDir::new().unwrap();
    let m = synth(dir.path(), "fx", &[]);
    let o = zspeedl(&["train", "--dataset", s(&m), "--method", "eszsl", "--hp", "gamma=1", "--out", "/tmp/x"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn eval_is_byte_deterministic_and_perfect_on_clean_data() {
    let dir = TempDir::new().unwrap();
    let m = synth(dir.path(), "clean", &["--noise", "0", "--classes", "12", "--feature-dim", "16"]);
    let model = train(&dir, &m, "sae", &[], "sae");
    let run = |setting: &str, out: &str| {
        let p = dir.path().join(out);
        let o = zspeedl(&["eval", "--model", s(&model), "--dataset", s(&m), "--setting", setting, "--out", s(&p)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read(p).unwrap()
    };
    let a = run("zsl", "a.json");
    assert_eq!(a, run("zsl", "b.json"));
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["mca"], 100.0);
    assert_eq!(v["setting"], "zsl");
    assert_eq!(v["backbone"], "clean");
    assert!(v["hyperparameters"]["lambda"].is_f64());
    assert!(v.get("h").is_none());

    let g: Value = serde_json::from_slice(&run("gzsl", "g.json")).unwrap();
    for k in ["u", "s", "h"] {
        let x = g[k].as_f64().unwrap();
        assert!((0.0..=100.0).contains(&x));
        assert_eq!((x * 100.0).round() / 100.0, x, "two decimals");
    }
    assert!(g.get("mca").is_none());
}

#[test]
fn gzsl_needs_seen_test_instances() {
    let dir = TempDir::new().unwrap();
    let mut b = synthetic_bundle(&SyntheticSpec::default());
    let moved = std::mem::take(&mut b.split.test_seen_idx);
    b.split.val_idx.extend(moved);
    let m = write_bundle(&b, dir.path().join("noseen")).unwrap();
    let model = train(&dir, &m, "eszsl", &["gamma=0.1,lambda=0.1"], "eszsl");
    let o = zspeedl(&["eval", "--model", s(&model), "--dataset", s(&m), "--setting", "gzsl"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("test_seen"));
    assert_eq!(code(&zspeedl(&["eval", "--model", s(&model), "--dataset", s(&m)])), 0);
}

#[test]
fn eval_rejects_incompatible_dataset() {
    let dir = TempDir::new().unwrap();
    let m = synth(dir.path(), "fx", &[]);
    let wide = synth(dir.path(), "wide", &["--feature-dim", "9"]);
    let model = train(&dir, &m, "eszsl", &["gamma=0.1,lambda=0.1"], "eszsl");
    let o = zspeedl(&["eval", "--model", s(&model), "--dataset", s(&wide)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

/// Checks the report against its schema without going through the
/// toolkit's own deserializer.
fn check_report_schema(v: &Value) {
    let top = v.as_object().expect("object");
    let mut keys: Vec<&str> = top.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["created_at", "device_label", "entries", "toolkit_version"]);
    assert!(v["toolkit_version"].is_string());
    let created = v["created_at"].as_str().unwrap();
    assert!(chrono::DateTime::parse_from_rfc3339(created).is_ok(), "{created}");
    let entries = v["entries"].as_array().unwrap();
    assert!(!entries.is_empty());
    for e in entries {
        for k in ["method", "backbone_tag", "device_label"] {
            assert!(e[k].is_string(), "{k}");
        }
        for k in ["feature_dim", "repeats", "warmup"] {
            assert!(e[k].is_u64(), "{k}");
        }
        let (avg, std, min) = (
            e["avg_ms"].as_f64().unwrap(),
            e["std_ms"].as_f64().unwrap(),
            e["min_ms"].as_f64().unwrap(),
        );
        assert!(std >= 0.0 && min <= avg && min >= 0.0);
        assert!(e["repeats"].as_u64().unwrap() >= 1);
    }
}

#[test]
fn bench_writes_a_schema_valid_report() {
    let dir = TempDir::new().unwrap();
    let m = synth(dir.path(), "fx", &[]);
    let eszsl = train(&dir, &m, "eszsl", &["gamma=0.1,lambda=0.1"], "eszsl");
    let sae = train(&dir, &m, "sae", &["lambda=0.5"], "sae");
    let report = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let o = zspeedl(&[
        "bench", "--model", s(&eszsl), s(&sae), "--dataset", s(&m), "--warmup", "2", "--repeats", "20",
        "--device-label", "desktop", "--out", s(&report), "--csv", s(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = read_json(&report);
    check_report_schema(&v);
    assert_eq!(v["entries"].as_array().unwrap().len(), 2);
    assert_eq!(v["entries"][1]["method"], "sae");
    assert_eq!(v["entries"][0]["repeats"], 20);
    let table = fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().next().unwrap(), "method,8");
    assert_eq!(table.lines().count(), 3);

    let o = zspeedl(&[
        "bench", "--model", s(&eszsl), "--dataset", s(&m), "--batch", "16", "--repeats", "5", "--out", s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_json(&report)["entries"][0]["method"], "eszsl[batch=16]");

    let missing = dir.path().join("missing");
    let o = zspeedl(&["bench", "--model", s(&missing), "--dataset", s(&m), "--out", s(&report)]);
    assert_eq!(code(&o), 2);
    let o = zspeedl(&["bench", "--model", s(&eszsl), "--dataset", s(&m), "--repeats", "0", "--out", s(&report)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn thread_variable_must_be_a_positive_integer() {
    let dir = TempDir::new().unwrap();
    let m = synth(dir.path(), "fx", &[]);
    for bad in ["0", "many"] {
        let o = zspeedl_env(&["validate", "--dataset", s(&m)], &[("ZSPEEDL_THREADS", bad)]);
        assert_eq!(code(&o), 1, "{bad}");
    }
    let o = zspeedl_env(&["validate", "--dataset", s(&m)], &[("ZSPEEDL_THREADS", "2")]);
    assert_eq!(code(&o), 0);
}

#[test]
fn seeded_training_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let m = synth(dir.path(), "fx", &[]);
    let hp = ["hidden=16,epochs=5"];
    let a = train(&dir, &m, "dem", &hp, "a");
    let b = train(&dir, &m, "dem", &hp, "b");
    for f in ["header.json", "w1.zspl", "w2.zspl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn sweep_fills_the_table_and_resumes() {
    let dir = TempDir::new().unwrap();
    let a = synth(dir.path(), "bb1", &[]);
    let b = synth(dir.path(), "bb2", &["--feature-dim", "10", "--seed", "3"]);
    let out = dir.path().join("sweep.csv");
    let args = [
        "sweep", "--method", "eszsl,sae", "--dataset", s(&a), s(&b), "--out", s(&out),
    ];
    let o = zspeedl(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    assert_eq!(
        rows.iter().map(|r| (r[0].as_str(), r[1].as_str())).collect::<Vec<_>>(),
        [("eszsl", "bb1"), ("eszsl", "bb2"), ("sae", "bb1"), ("sae", "bb2")]
    );
    assert!(rows.iter().all(|r| r[7].is_empty() && !r[3].is_empty() && !r[6].is_empty()));

    let progress = dir.path().join("sweep.csv.progress.jsonl");
    let before = fs::read_to_string(&progress).unwrap();
    assert_eq!(before.lines().count(), 4);
    let first = fs::read(&out).unwrap();
    let o = zspeedl(&args);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 computed"));
    assert_eq!(fs::read_to_string(&progress).unwrap(), before);
    assert_eq!(fs::read(&out).unwrap(), first);
}

#[test]
fn sweep_after_interruption_only_runs_missing_cells() {
    let dir = TempDir::new().unwrap();
    let a = synth(dir.path(), "bb1", &[]);
    let out = dir.path().join("sweep.csv");
    let progress = dir.path().join("p.jsonl");
    let run = |methods: &str| {
        zspeedl(&[
            "sweep", "--method", methods, "--dataset", s(&a), "--setting", "zsl", "--out", s(&out), "--progress",
            s(&progress),
        ])
    };
    assert_eq!(code(&run("eszsl")), 0);
    let mut text = fs::read_to_string(&progress).unwrap();
    text.push_str("{\"method\":\"sae\",\"manif");
    fs::write(&progress, text).unwrap();
    let o = run("eszsl,sae");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("1 computed, 1 reused"));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| !r[3].is_empty() && r[4].is_empty()));
}

#[test]
fn failed_sweep_cells_are_recorded_and_retried() {
    let dir = TempDir::new().unwrap();
    let a = synth(dir.path(), "bb1", &[]);
    let out = dir.path().join("sweep.csv");
    let o = zspeedl(&[
        "sweep", "--method", "dem,eszsl", "--dataset", s(&a), "--hp", "dem:lr=1000", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert!(rows[0][7].contains("non-finite loss"), "{:?}", rows[0]);
    assert!(rows[1][7].is_empty());

    let o = zspeedl(&[
        "sweep", "--method", "dem,eszsl", "--dataset", s(&a), "--hp", "dem:lr=1e-3,dem:hidden=8,dem:epochs=3",
        "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("1 computed, 1 reused"));
    assert!(csv_rows(&out)[0][7].is_empty());

    let o = zspeedl(&["sweep", "--method", "dem", "--dataset", "/nonexistent.json", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn fps_lists_unmatched_backbones_and_succeeds() {
    let dir = TempDir::new().unwrap();
    let extract = dir.path().join("extract.json");
    fs::write(
        &extract,
        r#"[{"backbone_tag": "mobilenet", "avg_ms": 310.52, "std_ms": 2.0, "repeats": 100},
            {"backbone_tag": "xception", "avg_ms": 1000.0, "std_ms": 2.0, "repeats": 100}]"#,
    )
    .unwrap();
    let classify = dir.path().join("classify.json");
    fs::write(
        &classify,
        r#"{"toolkit_version": "0.1.0", "created_at": "2024-01-01T00:00:00Z", "device_label": "rpi4b",
            "entries": [{"method": "eszsl", "backbone_tag": "mobilenet", "feature_dim": 1024, "avg_ms": 0.81,
                         "std_ms": 0.01, "min_ms": 0.8, "repeats": 100, "warmup": 10, "device_label": "rpi4b"},
                        {"method": "eszsl", "backbone_tag": "vgg16", "feature_dim": 512, "avg_ms": 0.5,
                         "std_ms": 0.01, "min_ms": 0.4, "repeats": 100, "warmup": 10, "device_label": "rpi4b"}]}"#,
    )
    .unwrap();
    let accuracy = dir.path().join("acc.json");
    fs::write(
        &accuracy,
        r#"{"method": "eszsl", "backbone": "mobilenet", "dataset": "awa2", "setting": "zsl", "mca": 50.5,
            "hyperparameters": {}, "seed": 42}"#,
    )
    .unwrap();
    let out = dir.path().join("fps.csv");
    let o = zspeedl(&[
        "fps", "--extract", s(&extract), "--classify", s(&classify), "--accuracy", s(&accuracy), "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    let skipped: Vec<&str> = summary["skipped"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["backbone_tag"].as_str().unwrap())
        .collect();
    assert_eq!(skipped, ["vgg16", "xception"]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][5], "3.212");
    assert_eq!(rows[0][6], "awa2");
    assert_eq!(rows[0][7], "50.50");

    fs::write(&extract, "{").unwrap();
    let o = zspeedl(&["fps", "--extract", s(&extract), "--classify", s(&classify), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
}
