use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aitd_core::bilstm::{self, BiLstmModel, NetTrainConfig, SequenceExample};
use aitd_core::corpus::{self, ColumnMap, Corpus, Label};
use aitd_core::logreg::{self, Grid, LogRegModel, Penalty, TrainConfig};
use aitd_core::metrics;
use aitd_core::persist::{self, MetricsBundle, Provenance, Timing};
use aitd_core::splitter::{self, Partition, SplitManifest, Targets};
use aitd_core::textproc::{self, Vocab};
use aitd_core::tfidf::TfidfModel;
use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{
    EvaluateArgs, IngestArgs, InputFormat, LeakageFailure, ModelKindArg, PredictArgs, ReportArgs, SplitArgs, TrainArgs,
};

const TFIDF_FILE: &str = "tfidf.aitd";
const LOGREG_FILE: &str = "logreg.aitd";
const BILSTM_FILE: &str = "bilstm.aitd";
const VOCAB_FILE: &str = "vocab.txt";
const SUMMARY_FILE: &str = "train_summary.json";
const TIMING_FILE: &str = "train_timing.json";
const PROVENANCE_FILE: &str = "provenance.json";

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn provenance(seed: u64, inputs: &[&Path]) -> Result<Provenance> {
    let mut p = Provenance::new(seed);
    for path in inputs {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        p = p.with_input(file_name(path), &bytes);
    }
    Ok(p)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Provenance sidecar for outputs (CSV, JSONL) that cannot embed it.
fn write_provenance(path: &Path, command: &str, prov: &Provenance) -> Result<()> {
    write_json(path, &json!({ "command": command, "provenance": prov }))
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let c = if is_csv {
        corpus::load_csv(path, &ColumnMap::default())?
    } else {
        corpus::load_jsonl(path)?
    };
    Ok(c)
}

pub fn ingest(a: &IngestArgs, seed: u64) -> Result<()> {
    let columns = ColumnMap {
        text: a.text_column.clone(),
        label: a.label_column.clone(),
        source: a.source_column.clone(),
        id: a.id_column.clone(),
    };
    let mut parts = Vec::with_capacity(a.input.len());
    for path in &a.input {
        let csv = match a.format {
            InputFormat::Csv => true,
            InputFormat::Jsonl => false,
            InputFormat::Auto => path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")),
        };
        let c = if csv {
            corpus::load_csv(path, &columns)?
        } else {
            corpus::load_jsonl(path)?
        };
        log::info!("{}: {} records", path.display(), c.len());
        parts.push(c);
    }
    let (merged, collisions) = Corpus::merge(parts);
    for id in &collisions {
        log::warn!("duplicate id {id:?} across inputs was suffixed");
    }
    let cleaned = corpus::clean(&merged);
    corpus::write_jsonl(&cleaned.corpus, &a.out)?;
    let stats = corpus::stats(&cleaned.corpus);
    let inputs: Vec<&Path> = a.input.iter().map(PathBuf::as_path).collect();
    let prov = provenance(seed, &inputs)?;
    let sidecar = a.out.with_extension("provenance.json");
    write_provenance(&sidecar, "ingest", &prov)?;
    if let Some(path) = &a.stats {
        write_json(
            path,
            &json!({
                "stats": stats,
                "dropped": cleaned.dropped,
                "id_collisions": collisions,
                "provenance": prov,
            }),
        )?;
    }
    print!("{}", stats.to_table());
    println!(
        "dropped {} empty records; {} id collisions",
        cleaned.dropped,
        collisions.len()
    );
    Ok(())
}

fn parse_targets(s: &str) -> Result<Targets> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("--targets {s:?}: expected three comma-separated numbers"))?;
    let [train, val, test] = v[..] else {
        bail!("--targets {s:?}: expected three values, got {}", v.len());
    };
    Ok(Targets::new(train, val, test)?)
}

pub fn split(a: &SplitArgs, seed: u64) -> Result<()> {
    let corpus = load_corpus(&a.input)?;
    let manifest = if let Some(path) = &a.manifest {
        SplitManifest::load(path)?
    } else if a.preset.is_some() {
        splitter::paper_preset()
    } else {
        let targets = parse_targets(a.targets.as_deref().expect("clap enforces one source"))?;
        splitter::assign_topics(&corpus, targets, seed)?
    };
    create_dir(&a.out_dir)?;
    manifest.save(a.out_dir.join("manifest.json"))?;
    let parts = splitter::apply_manifest(&corpus, &manifest)?;
    for w in &parts.warnings {
        log::warn!("{w}");
    }
    for p in Partition::ALL {
        corpus::write_jsonl(parts.get(p), a.out_dir.join(format!("{}.jsonl", p.name())))?;
    }
    let report = splitter::verify_no_leakage(&manifest, parts.as_array());
    let mut inputs = vec![a.input.as_path()];
    if let Some(m) = &a.manifest {
        inputs.push(m.as_path());
    }
    let prov = provenance(seed, &inputs)?;
    let total = corpus.len().max(1) as f64;
    let sizes = parts.sizes();
    write_json(
        &a.out_dir.join("leakage.json"),
        &json!({
            "status": report.status(),
            "report": report,
            "sizes": sizes,
            "fractions": sizes.map(|n| n as f64 / total),
            "warnings": parts.warnings,
            "provenance": prov,
        }),
    )?;
    write_provenance(&a.out_dir.join(PROVENANCE_FILE), "split", &prov)?;
    for p in Partition::ALL {
        let n = sizes[p.index()];
        println!(
            "{:<5} {:>8} records ({:.1}%), {} topics",
            p.name(),
            n,
            100.0 * n as f64 / total,
            report.topics_per_partition[p.index()]
        );
    }
    println!("leakage check: {}", report.status());
    if !report.pass {
        for v in &report.violations {
            eprintln!("violation: {}", serde_json::to_string(v)?);
        }
        return Err(LeakageFailure(report.violations.len()).into());
    }
    Ok(())
}

/// Written by `train`, read by `evaluate` and `predict`.
#[derive(Debug, Serialize, Deserialize)]
struct TrainSummary {
    model_kind: String,
    selected: Value,
    train_accuracy: f64,
    n_train: usize,
    n_val: Option<usize>,
    max_len: Option<usize>,
    provenance: Provenance,
}

fn axis<T: Copy>(given: &[T], grid: Vec<T>, default: T, single: bool) -> Vec<T> {
    match (given.is_empty(), single) {
        (false, true) => vec![given[0]],
        (false, false) => given.to_vec(),
        (true, true) => vec![default],
        (true, false) => grid,
    }
}

fn accuracy(probs: &[f64], labels: &[Label], threshold: f64) -> f64 {
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p >= threshold) == (**y == Label::Ai))
        .count();
    correct as f64 / labels.len().max(1) as f64
}

fn lexical_docs(c: &Corpus) -> Vec<Vec<String>> {
    c.records()
        .par_iter()
        .map(|r| textproc::lexical_terms(&r.text))
        .collect()
}

fn sequence_examples(c: &Corpus, vocab: &Vocab, max_len: usize) -> Result<Vec<SequenceExample>> {
    c.records()
        .par_iter()
        .map(|r| {
            let e = textproc::encode(&textproc::tokenize(&r.text), vocab, max_len)?;
            Ok(SequenceExample {
                ids: e.ids,
                len: e.len,
                label: r.label,
            })
        })
        .collect()
}

pub fn train(a: &TrainArgs, seed: u64) -> Result<()> {
    let train_corpus = load_corpus(&a.train)?;
    if train_corpus.is_empty() {
        bail!("training corpus {} is empty", a.train.display());
    }
    create_dir(&a.out_dir)?;
    let mut inputs = vec![a.train.as_path()];
    if let Some(v) = &a.val {
        inputs.push(v.as_path());
    }
    let prov = provenance(seed, &inputs)?;
    let started = Instant::now();
    let summary = match a.model_kind {
        ModelKindArg::TfidfLogreg => train_logreg(a, seed, &train_corpus, &prov)?,
        ModelKindArg::Bilstm => train_bilstm(a, seed, &train_corpus, &prov)?,
    };
    let seconds = started.elapsed().as_secs_f64();
    write_json(&a.out_dir.join(SUMMARY_FILE), &summary)?;
    write_json(&a.out_dir.join(TIMING_FILE), &json!({ "train_seconds": seconds }))?;
    write_provenance(&a.out_dir.join(PROVENANCE_FILE), "train", &prov)?;
    println!("selected {}: {}", summary.model_kind, summary.selected);
    println!("train accuracy {:.4}; {:.1}s", summary.train_accuracy, seconds);
    Ok(())
}

fn train_logreg(a: &TrainArgs, seed: u64, corpus: &Corpus, prov: &Provenance) -> Result<TrainSummary> {
    let paper = Grid::paper();
    let grid = Grid {
        max_features: axis(&a.max_features, paper.max_features, 15_000, a.single_config),
        c: axis(&a.c, paper.c, 1.0, a.single_config),
        penalty: axis(&a.penalty, paper.penalty, Penalty::L2, a.single_config),
    };
    let base = TrainConfig {
        max_iters: a.max_iters,
        seed,
        ..TrainConfig::default()
    };
    let docs = lexical_docs(corpus);
    let labels = corpus.labels();
    log::info!("grid search over {} points, {}-fold", grid.len(), a.folds);
    let result = logreg::grid_search_cv(&docs, &labels, &grid, a.folds, &base)?;
    persist::save(&result.tfidf, prov, a.out_dir.join(TFIDF_FILE))?;
    persist::save(&result.model, prov, a.out_dir.join(LOGREG_FILE))?;
    write_text(&a.out_dir.join("cv_table.csv"), &result.table.to_csv())?;
    let x = result.tfidf.transform_all(&docs);
    let probs = result.model.predict_proba(&x)?;
    Ok(TrainSummary {
        model_kind: ModelKindArg::TfidfLogreg.name().into(),
        selected: json!({
            "max_features": result.best.max_features,
            "C": result.best.c,
            "penalty": result.best.penalty.to_string(),
            "folds": a.folds,
            "cv_mean_accuracy": result.table.best().map(|r| r.mean_accuracy),
            "iterations": result.model.meta.iterations,
            "converged": result.model.meta.converged,
        }),
        train_accuracy: accuracy(&probs, &labels, 0.5),
        n_train: corpus.len(),
        n_val: None,
        max_len: None,
        provenance: prov.clone(),
    })
}

fn train_bilstm(a: &TrainArgs, seed: u64, corpus: &Corpus, prov: &Provenance) -> Result<TrainSummary> {
    let val_path = a.val.as_ref().ok_or_else(|| anyhow!("--val is required for bilstm"))?;
    let val_corpus = load_corpus(val_path)?;
    let tokens: Vec<Vec<String>> = corpus
        .records()
        .par_iter()
        .map(|r| textproc::tokenize(&r.text))
        .collect();
    let vocab = textproc::build_vocab(&tokens, a.vocab_size, true)?;
    log::info!("vocabulary {} entries, coverage {:.4}", vocab.len(), vocab.coverage());
    let train_set = sequence_examples(corpus, &vocab, a.max_len)?;
    let val_set = sequence_examples(&val_corpus, &vocab, a.max_len)?;

    let defaults = NetTrainConfig::default();
    let base = NetTrainConfig {
        embed_dim: a.embed_dim,
        max_epochs: a.max_epochs,
        patience: a.patience,
        seed,
        ..defaults
    };
    let hidden = axis(
        &a.hidden_units,
        vec![64, 128, 256],
        defaults.hidden_units,
        a.single_config,
    );
    let dropout = axis(&a.dropout, vec![0.2, 0.3, 0.5], defaults.dropout_rate, a.single_config);
    let batch = axis(&a.batch_size, vec![128, 256], defaults.batch_size, a.single_config);
    let lr = axis(
        &a.learning_rate,
        vec![0.0005, 0.001],
        defaults.learning_rate,
        a.single_config,
    );
    let mut configs = Vec::new();
    for &hidden_units in &hidden {
        for &dropout_rate in &dropout {
            for &batch_size in &batch {
                for &learning_rate in &lr {
                    configs.push(NetTrainConfig {
                        hidden_units,
                        dropout_rate,
                        batch_size,
                        learning_rate,
                        ..base
                    });
                }
            }
        }
    }

    let mut grid_csv = String::from("hidden_units,dropout,batch_size,learning_rate,best_epoch,stopped_epoch,val_acc\n");
    let mut best: Option<(f64, NetTrainConfig, BiLstmModel, bilstm::TrainHistory)> = None;
    for (i, cfg) in configs.iter().enumerate() {
        log::info!("config {}/{}: {cfg:?}", i + 1, configs.len());
        let (model, history) = bilstm::train(&train_set, &val_set, vocab.len(), cfg)?;
        let acc = history.best().map_or(0.0, |e| e.val_acc);
        grid_csv.push_str(&format!(
            "{},{},{},{},{},{},{:.6}\n",
            cfg.hidden_units,
            cfg.dropout_rate,
            cfg.batch_size,
            cfg.learning_rate,
            history.best_epoch,
            history.stopped_epoch,
            acc
        ));
        if best.as_ref().is_none_or(|(b, ..)| acc > *b) {
            best = Some((acc, *cfg, model, history));
        }
    }
    let (val_acc, cfg, model, history) = best.expect("at least one configuration");
    persist::save(&model, prov, a.out_dir.join(BILSTM_FILE))?;
    vocab.save(a.out_dir.join(VOCAB_FILE))?;
    write_text(&a.out_dir.join("history.csv"), &history.to_csv())?;
    if configs.len() > 1 {
        write_text(&a.out_dir.join("grid.csv"), &grid_csv)?;
    }
    let probs = bilstm::predict_proba(&model, &train_set)?;
    Ok(TrainSummary {
        model_kind: ModelKindArg::Bilstm.name().into(),
        selected: json!({
            "config": cfg,
            "best_epoch": history.best_epoch,
            "stopped_epoch": history.stopped_epoch,
            "val_accuracy": val_acc,
            "vocab_size": vocab.len(),
            "vocab_coverage": vocab.coverage(),
        }),
        train_accuracy: accuracy(&probs, &corpus.labels(), 0.5),
        n_train: corpus.len(),
        n_val: Some(val_corpus.len()),
        max_len: Some(a.max_len),
        provenance: prov.clone(),
    })
}

/// A trained model loaded from a `train` output directory.
enum Classifier {
    Lexical {
        tfidf: TfidfModel,
        model: LogRegModel,
    },
    Sequence {
        model: BiLstmModel,
        vocab: Vocab,
        max_len: usize,
    },
}

struct Loaded {
    classifier: Classifier,
    summary: TrainSummary,
    files: Vec<PathBuf>,
}

fn load_model_dir(dir: &Path) -> Result<Loaded> {
    let summary_path = dir.join(SUMMARY_FILE);
    let summary: TrainSummary = serde_json::from_slice(
        &fs::read(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?,
    )
    .with_context(|| format!("parsing {}", summary_path.display()))?;
    let (classifier, files) = match summary.model_kind.as_str() {
        "tfidf-logreg" => {
            let (tfidf, _) = persist::load::<TfidfModel>(dir.join(TFIDF_FILE))?;
            let (model, _) = persist::load::<LogRegModel>(dir.join(LOGREG_FILE))?;
            if tfidf.dim() != model.dim() {
                return Err(aitd_core::Error::DimMismatch(format!(
                    "TF-IDF vocabulary has {} features but the classifier expects {}",
                    tfidf.dim(),
                    model.dim()
                ))
                .into());
            }
            (
                Classifier::Lexical { tfidf, model },
                vec![dir.join(TFIDF_FILE), dir.join(LOGREG_FILE)],
            )
        }
        "bilstm" => {
            let (model, _) = persist::load::<BiLstmModel>(dir.join(BILSTM_FILE))?;
            let vocab = Vocab::load(dir.join(VOCAB_FILE))?;
            if vocab.len() != model.dims().vocab {
                return Err(aitd_core::Error::DimMismatch(format!(
                    "vocabulary file has {} entries but the network embeds {}",
                    vocab.len(),
                    model.dims().vocab
                ))
                .into());
            }
            let max_len = summary.max_len.ok_or_else(|| anyhow!("{SUMMARY_FILE} lacks max_len"))?;
            (
                Classifier::Sequence { model, vocab, max_len },
                vec![dir.join(BILSTM_FILE), dir.join(VOCAB_FILE)],
            )
        }
        other => bail!("unknown model kind {other:?} in {}", summary_path.display()),
    };
    Ok(Loaded {
        classifier,
        summary,
        files,
    })
}

impl Classifier {
    fn probabilities(&self, corpus: &Corpus) -> Result<Vec<f64>> {
        Ok(match self {
            Classifier::Lexical { tfidf, model } => model.predict_proba(&tfidf.transform_all(&lexical_docs(corpus)))?,
            Classifier::Sequence { model, vocab, max_len } => {
                bilstm::predict_proba(model, &sequence_examples(corpus, vocab, *max_len)?)?
            }
        })
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        bail!("--threshold must lie in [0, 1], got {t}");
    }
    Ok(())
}

fn train_seconds(dir: &Path) -> f64 {
    let read = || -> Option<f64> {
        let v: Value = serde_json::from_slice(&fs::read(dir.join(TIMING_FILE)).ok()?).ok()?;
        v["train_seconds"].as_f64()
    };
    read().unwrap_or_else(|| {
        log::warn!("no training time recorded in {}", dir.display());
        0.0
    })
}

pub fn evaluate(a: &EvaluateArgs, seed: u64) -> Result<()> {
    check_threshold(a.threshold)?;
    let loaded = load_model_dir(&a.model_dir)?;
    let corpus = load_corpus(&a.input)?;
    let started = Instant::now();
    let probs = loaded.classifier.probabilities(&corpus)?;
    let inference_seconds = started.elapsed().as_secs_f64();

    let labels = corpus.labels();
    let preds: Vec<Label> = probs
        .iter()
        .map(|&p| if p >= a.threshold { Label::Ai } else { Label::Human })
        .collect();
    let cm = metrics::confusion(&labels, &preds)?;
    let classes = metrics::prf(&cm)?;
    let both = labels.contains(&Label::Ai) && labels.contains(&Label::Human);
    let roc = if both {
        Some(metrics::roc_curve(&labels, &probs)?)
    } else {
        log::warn!("evaluation set has a single class; AUC and ROC are omitted");
        None
    };
    let mut inputs: Vec<&Path> = vec![a.input.as_path()];
    inputs.extend(loaded.files.iter().map(PathBuf::as_path));
    let train_acc = loaded.summary.train_accuracy;
    let bundle = MetricsBundle {
        model: loaded.summary.model_kind.clone(),
        threshold: a.threshold,
        n_samples: cm.total(),
        confusion: cm,
        classes,
        auc: roc.as_ref().map(|r| r.auc),
        train_accuracy: Some(train_acc),
        overfit_gap: Some(metrics::overfit_gap(train_acc, classes.accuracy)),
        provenance: provenance(seed, &inputs)?,
        roc,
        timing: Some(Timing {
            train_seconds: train_seconds(&a.model_dir),
            inference_seconds,
        }),
    };
    let files = persist::write_report(&bundle, &a.out_dir)?;
    print!("{}", fs::read_to_string(&files.text)?);
    Ok(())
}

pub fn predict(a: &PredictArgs, seed: u64) -> Result<()> {
    check_threshold(a.threshold)?;
    let loaded = load_model_dir(&a.model_dir)?;
    let corpus = load_corpus(&a.input)?;
    let probs = loaded.classifier.probabilities(&corpus)?;
    let mut w = csv::Writer::from_path(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    w.write_record(["id", "probability", "label"])?;
    for (r, p) in corpus.iter().zip(&probs) {
        let label = if *p >= a.threshold { Label::Ai } else { Label::Human };
        w.write_record([r.id.as_str(), &p.to_string(), &label.to_string()])?;
    }
    w.flush()?;
    let mut inputs: Vec<&Path> = vec![a.input.as_path()];
    inputs.extend(loaded.files.iter().map(PathBuf::as_path));
    let prov = provenance(seed, &inputs)?;
    write_provenance(&a.out.with_extension("provenance.json"), "predict", &prov)?;
    let ai = probs.iter().filter(|&&p| p >= a.threshold).count();
    println!("{} records, {ai} labelled AI at threshold {}", probs.len(), a.threshold);
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let mut bundles = Vec::with_capacity(a.metrics.len());
    for path in &a.metrics {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let b: MetricsBundle = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
        bundles.push(b);
    }
    let table = persist::comparison_table(&bundles);
    if let Some(out) = &a.out {
        write_text(out, &table)?;
    }
    print!("{table}");
    Ok(())
}
