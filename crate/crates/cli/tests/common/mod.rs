#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

const HUMAN: &[&str] = &[
    "honestly", "kinda", "yeah", "lol", "gonna", "stuff", "weird", "dunno", "pretty", "bad", "mom", "guess",
];
const AI: &[&str] = &[
    "furthermore",
    "essential",
    "crucial",
    "comprehensive",
    "overall",
    "additionally",
    "significant",
    "considerations",
    "perspectives",
    "ultimately",
    "various",
    "framework",
];
const TOPICS: &[(&str, &[&str])] = &[
    ("cars", &["engine", "road", "driver", "traffic"]),
    ("space", &["planet", "orbit", "rocket", "venus"]),
    ("school", &["teacher", "homework", "grades", "class"]),
    ("food", &["recipe", "butter", "oven", "dinner"]),
    ("money", &["bank", "loan", "budget", "stocks"]),
    ("health", &["doctor", "sleep", "diet", "fever"]),
];

/// Small labelled corpus where style words carry the label and topic words
/// carry the source. Every topic has both classes.
pub fn toy_jsonl(per_topic: usize, seed: u64) -> String {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut out = String::new();
    for (t, (topic, words)) in TOPICS.iter().enumerate() {
        for i in 0..per_topic {
            let ai = i % 2 == 0;
            let style = if ai { AI } else { HUMAN };
            let len = rng.random_range(12..24);
            let text: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.random_bool(0.6) {
                        *style.choose(&mut rng).unwrap()
                    } else {
                        *words.choose(&mut rng).unwrap()
                    }
                })
                .collect();
            let line = serde_json::json!({
                "id": format!("{t}-{i}"),
                "text": text.join(" "),
                "label": u8::from(ai),
                "source": topic,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
    }
    out
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aitd"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "aitd {} failed with {:?}\nstderr:\n{}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// ingest → split → train (both kinds) → evaluate → predict → report in `root`.
pub fn toy_pipeline(root: &Path) -> Vec<PathBuf> {
    fs::create_dir_all(root).unwrap();
    let raw = root.join("raw.jsonl");
    fs::write(&raw, toy_jsonl(30, 42)).unwrap();
    let clean = root.join("clean.jsonl");
    run_ok(&["ingest", "--input", s(&raw), "--out", s(&clean)]);
    let split = root.join("split");
    run_ok(&[
        "split",
        "--input",
        s(&clean),
        "--targets",
        "0.6,0.2,0.2",
        "--out-dir",
        s(&split),
    ]);
    let (train, val, test) = (
        split.join("train.jsonl"),
        split.join("val.jsonl"),
        split.join("test.jsonl"),
    );

    let lr = root.join("lr");
    run_ok(&[
        "train",
        "--model-kind",
        "tfidf-logreg",
        "--train",
        s(&train),
        "--out-dir",
        s(&lr),
        "--max-features",
        "20,200",
        "--c",
        "0.1,10",
        "--penalty",
        "l2",
        "--folds",
        "3",
    ]);
    let nn = root.join("nn");
    run_ok(&[
        "train",
        "--model-kind",
        "bilstm",
        "--train",
        s(&train),
        "--val",
        s(&val),
        "--out-dir",
        s(&nn),
        "--single-config",
        "--hidden-units",
        "8",
        "--embed-dim",
        "8",
        "--batch-size",
        "16",
        "--learning-rate",
        "0.01",
        "--max-epochs",
        "4",
        "--max-len",
        "32",
    ]);

    let mut metrics = Vec::new();
    for (name, dir) in [("lr", &lr), ("nn", &nn)] {
        let eval = root.join(format!("eval-{name}"));
        run_ok(&[
            "evaluate",
            "--model-dir",
            s(dir),
            "--input",
            s(&test),
            "--out-dir",
            s(&eval),
        ]);
        metrics.push(eval.join("metrics.json"));
        let pred = root.join(format!("pred-{name}.csv"));
        run_ok(&["predict", "--model-dir", s(dir), "--input", s(&test), "--out", s(&pred)]);
    }
    let table = run_ok(&[
        "report",
        "--metrics",
        s(&metrics[0]),
        s(&metrics[1]),
        "--out",
        s(&root.join("report.txt")),
    ]);
    assert!(table.status.success());
    metrics
}

/// Every file under `root`, relative path plus bytes with wall-clock fields
/// removed.
pub fn comparable_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            let name = path.file_name().unwrap().to_string_lossy().to_string();
            let bytes = fs::read(&path).unwrap();
            let bytes = match name.as_str() {
                "train_timing.json" => continue,
                "metrics.json" => {
                    let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                    v.as_object_mut().unwrap().remove("timing");
                    serde_json::to_vec(&v).unwrap()
                }
                _ if name.ends_with(".txt") => strip_timing(&String::from_utf8(bytes).unwrap(), rel == "report.txt"),
                _ => bytes,
            };
            out.push((rel, bytes));
        }
    }
    out.sort();
    out
}

/// Drop the trailing timing line of a per-model report and, for the
/// comparison table, the two seconds columns of its first block.
fn strip_timing(text: &str, comparison: bool) -> Vec<u8> {
    let mut in_head = comparison;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.starts_with("timing ") {
            continue;
        }
        if line.is_empty() {
            in_head = false;
        }
        if in_head {
            let fields: Vec<&str> = line.split_whitespace().collect();
            out.push(fields[..fields.len() - 2].join(" "));
        } else {
            out.push(line.to_string());
        }
    }
    out.join("\n").into_bytes()
}
