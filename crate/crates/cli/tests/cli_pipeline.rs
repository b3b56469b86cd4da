mod common;

use std::fs;

use common::{run, run_ok, s, toy_jsonl};
use serde_json::Value;

fn read_json(p: &std::path::Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

#[test]
fn toy_pipeline_writes_expected_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let metrics = common::toy_pipeline(root);

    let leakage = read_json(&root.join("split/leakage.json"));
    assert_eq!(leakage["status"], "PASS");
    assert!(root.join("split/manifest.json").exists());
    assert!(root.join("clean.provenance.json").exists());

    let cv = fs::read_to_string(root.join("lr/cv_table.csv")).unwrap();
    assert_eq!(cv.lines().count(), 1 + 4);
    assert!(root.join("lr/tfidf.aitd").exists() && root.join("lr/logreg.aitd").exists());

    let history = fs::read_to_string(root.join("nn/history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss,val_acc\n"));
    let epochs = history.lines().count() - 1;
    assert!((1..=4).contains(&epochs));
    assert!(!root.join("nn/grid.csv").exists());

    for m in &metrics {
        let v = read_json(m);
        assert!(v["timing"]["train_seconds"].as_f64().unwrap() >= 0.0);
        assert!(v["timing"]["inference_seconds"].as_f64().unwrap() >= 0.0);
        assert!(v["content_sha256"].as_str().unwrap().len() == 64);
        let cm = &v["confusion"];
        let total: u64 = ["tp", "fp", "fn", "tn"].iter().map(|k| cm[k].as_u64().unwrap()).sum();
        assert_eq!(total, v["n_samples"].as_u64().unwrap());
        let report = fs::read_to_string(m.with_file_name("report.txt")).unwrap();
        assert!(report.lines().last().unwrap().starts_with("timing "));
        assert!(m.with_file_name("confusion.csv").exists());
        assert!(m.with_file_name("roc.csv").exists());
    }
    // the toy corpus is separable by style words
    let lr = read_json(&metrics[0]);
    assert!(lr["classes"]["accuracy"].as_f64().unwrap() > 0.9);

    let table = fs::read_to_string(root.join("report.txt")).unwrap();
    assert!(table.starts_with("Model"));
    assert!(table.contains("tfidf-logreg") && table.contains("bilstm"));
}

#[test]
fn predict_threshold_splits_on_probability() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("all.jsonl");
    fs::write(&data, toy_jsonl(12, 7)).unwrap();
    let model = root.join("lr");
    run_ok(&[
        "train",
        "--model-kind",
        "tfidf-logreg",
        "--train",
        s(&data),
        "--out-dir",
        s(&model),
        "--single-config",
        "--max-features",
        "50",
    ]);
    let out = root.join("pred.csv");
    run_ok(&[
        "predict",
        "--model-dir",
        s(&model),
        "--input",
        s(&data),
        "--out",
        s(&out),
        "--threshold",
        "0.9",
    ]);
    let mut reader = csv::Reader::from_path(&out).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["id", "probability", "label"]);
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let p: f64 = rec[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(&rec[2], if p >= 0.9 { "1" } else { "0" });
        rows += 1;
    }
    assert_eq!(rows, 12 * 6);
    assert!(root.join("pred.provenance.json").exists());
}

#[test]
fn duplicated_manifest_topic_exits_with_leakage_code() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("all.jsonl");
    fs::write(&data, toy_jsonl(4, 1)).unwrap();
    let manifest = root.join("manifest.json");
    fs::write(
        &manifest,
        r#"{"targets":[0.6,0.2,0.2],"seed":42,"assignments":{
            "cars":"train","space":"train","school":"train","food":"val","money":"test","health":"test",
            "cars":"test"}}"#,
    )
    .unwrap();
    let out = run(&[
        "split",
        "--input",
        s(&data),
        "--manifest",
        s(&manifest),
        "--out-dir",
        s(&root.join("split")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let leakage = read_json(&root.join("split/leakage.json"));
    assert_eq!(leakage["status"], "FAIL");
}

#[test]
fn single_class_training_set_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("human.jsonl");
    let lines: String = toy_jsonl(6, 3)
        .lines()
        .filter(|l| l.contains("\"label\":0"))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&data, lines).unwrap();
    for kind in ["tfidf-logreg", "bilstm"] {
        let out = run(&[
            "train",
            "--model-kind",
            kind,
            "--train",
            s(&data),
            "--val",
            s(&data),
            "--out-dir",
            s(&dir.path().join(kind)),
            "--single-config",
        ]);
        assert_eq!(
            out.status.code(),
            Some(4),
            "{kind}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn bad_input_exits_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"text\": \"x\", \"label\": 7, \"source\": \"a\"}\n").unwrap();
    let out = run(&["ingest", "--input", s(&bad), "--out", s(&dir.path().join("o.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("label"));

    let out = run(&[
        "train",
        "--model-kind",
        "bilstm",
        "--train",
        s(&bad),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "evaluate",
        "--model-dir",
        s(dir.path()),
        "--input",
        s(&bad),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_missing_flags() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("all.jsonl");
    fs::write(&data, toy_jsonl(6, 9)).unwrap();
    let cfg = root.join("aitd.toml");
    fs::write(&cfg, "seed = 7\n[split]\ntargets = \"0.5,0.25,0.25\"\n").unwrap();
    let split = root.join("split");
    run_ok(&[
        "--config",
        s(&cfg),
        "split",
        "--input",
        s(&data),
        "--out-dir",
        s(&split),
    ]);
    let manifest = read_json(&split.join("manifest.json"));
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["targets"][0], 0.5);
}
