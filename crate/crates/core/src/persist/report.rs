use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{sha256_hex, Provenance};
use crate::error::{Error, Result};
use crate::metrics::{ClassReport, ConfusionMatrix, RocCurve};

pub const REPORT_JSON: &str = "metrics.json";
pub const REPORT_TEXT: &str = "report.txt";
const CONFUSION_CSV: &str = "confusion.csv";
const ROC_CSV: &str = "roc.csv";

/// Wall-clock seconds. Excluded from the content hash.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub train_seconds: f64,
    pub inference_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSummary {
    pub file: Option<String>,
    pub points: usize,
    pub note: Option<String>,
}

/// Everything an evaluation produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub model: String,
    pub threshold: f64,
    pub n_samples: u64,
    pub confusion: ConfusionMatrix,
    pub classes: ClassReport,
    pub auc: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub overfit_gap: Option<f64>,
    pub provenance: Provenance,
    #[serde(skip)]
    pub roc: Option<RocCurve>,
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub json: PathBuf,
    pub confusion: PathBuf,
    pub roc: Option<PathBuf>,
    pub text: PathBuf,
}

fn pct(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

fn text_table(b: &MetricsBundle) -> String {
    let auc = b.auc.map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
    let mut s = String::new();
    s.push_str(&format!("{:<16} {:>10} {:>8}\n", "Model", "Accuracy", "ROC-AUC"));
    s.push_str(&format!("{:<16} {:>10} {:>8}\n", b.model, pct(b.classes.accuracy), auc));
    s.push('\n');
    s.push_str(&class_rows(b));
    if let (Some(train), Some(gap)) = (b.train_accuracy, b.overfit_gap) {
        s.push_str(&format!(
            "\ntrain accuracy {}, overfit gap {gap:.2} points\n",
            pct(train)
        ));
    }
    s.push_str(&format!(
        "\nseed {} | tool {} | threshold {}\n",
        b.provenance.seed, b.provenance.tool_version, b.threshold
    ));
    for (name, hash) in &b.provenance.inputs {
        s.push_str(&format!("input {name} sha256 {hash}\n"));
    }
    s
}

/// Side-by-side summary of several evaluations: one accuracy/AUC/timing row
/// per model, then each model's per-class table.
pub fn comparison_table(bundles: &[MetricsBundle]) -> String {
    let secs = |t: Option<f64>| t.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
    let mut s = format!(
        "{:<16} {:>10} {:>8} {:>10} {:>14}\n",
        "Model", "Accuracy", "ROC-AUC", "Train (s)", "Inference (s)"
    );
    for b in bundles {
        s.push_str(&format!(
            "{:<16} {:>10} {:>8} {:>10} {:>14}\n",
            b.model,
            pct(b.classes.accuracy),
            b.auc.map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}")),
            secs(b.timing.map(|t| t.train_seconds)),
            secs(b.timing.map(|t| t.inference_seconds)),
        ));
    }
    for b in bundles {
        s.push_str(&format!("\n{}\n", b.model));
        s.push_str(&class_rows(b));
    }
    s
}

fn class_rows(b: &MetricsBundle) -> String {
    let mut s = format!(
        "{:<8} {:>10} {:>8} {:>9} {:>8}\n",
        "Class", "Precision", "Recall", "F1-Score", "Support"
    );
    for (name, m) in [("Human", &b.classes.human), ("AI", &b.classes.ai)] {
        s.push_str(&format!(
            "{:<8} {:>10.2} {:>8.2} {:>9.2} {:>8}\n",
            name, m.precision, m.recall, m.f1, m.support
        ));
    }
    s
}

/// Write metrics.json, confusion.csv, roc.csv (when the curve is non-empty)
/// and report.txt into `dir`.
///
/// The JSON carries `content_sha256`, computed over the JSON with the
/// `timing` field removed, so it is stable across runs. Timing is appended as
/// the final line of the text report.
pub fn write_report(bundle: &MetricsBundle, dir: impl AsRef<Path>) -> Result<ReportFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, content: &[u8]| -> Result<PathBuf> {
        let p = dir.join(name);
        fs::write(&p, content).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    };

    let roc_points = bundle.roc.as_ref().map_or(0, |r| r.points.len());
    let roc = if roc_points > 0 {
        Some(write(
            ROC_CSV,
            bundle.roc.as_ref().expect("non-empty").to_csv().as_bytes(),
        )?)
    } else {
        None
    };
    let roc_summary = RocSummary {
        file: roc.as_ref().map(|_| ROC_CSV.to_string()),
        points: roc_points,
        note: roc
            .is_none()
            .then(|| "ROC omitted: curve is empty (single-class labels)".to_string()),
    };

    let mut value = serde_json::to_value(bundle)?;
    let obj = value.as_object_mut().expect("bundle is an object");
    obj.insert("roc".into(), serde_json::to_value(&roc_summary)?);
    let timing = obj.remove("timing").unwrap_or(Value::Null);
    let content_hash = sha256_hex(&serde_json::to_vec(&value)?);
    let obj = value.as_object_mut().expect("bundle is an object");
    obj.insert("content_sha256".into(), Value::String(content_hash));
    obj.insert("timing".into(), timing);
    let mut json = serde_json::to_vec_pretty(&value)?;
    json.push(b'\n');

    let mut text = text_table(bundle);
    if let Some(t) = bundle.timing {
        text.push_str(&format!(
            "timing train {:.3}s inference {:.3}s\n",
            t.train_seconds, t.inference_seconds
        ));
    }

    Ok(ReportFiles {
        json: write(REPORT_JSON, &json)?,
        confusion: write(CONFUSION_CSV, bundle.confusion.to_csv().as_bytes())?,
        roc,
        text: write(REPORT_TEXT, text.as_bytes())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::metrics::{prf, roc_curve};

    fn bundle(accuracy_cm: ConfusionMatrix) -> MetricsBundle {
        MetricsBundle {
            model: "tfidf-logreg".into(),
            threshold: 0.5,
            n_samples: accuracy_cm.total(),
            confusion: accuracy_cm,
            classes: prf(&accuracy_cm).unwrap(),
            auc: None,
            train_accuracy: None,
            overfit_gap: None,
            provenance: Provenance::new(42),
            roc: None,
            timing: Some(Timing {
                train_seconds: 1.5,
                inference_seconds: 0.25,
            }),
        }
    }

    #[test]
    fn accuracy_renders_as_percent() {
        // 8287 correct of 10000.
        let cm = ConfusionMatrix {
            tp: 4000,
            fp: 900,
            fn_: 813,
            tn: 4287,
        };
        let dir = tempfile::tempdir().unwrap();
        let files = write_report(&bundle(cm), dir.path()).unwrap();
        let text = fs::read_to_string(files.text).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("82.87%"), "{text}");
        let table = comparison_table(&[bundle(cm)]);
        assert!(table.lines().nth(1).unwrap().contains("1.50"), "{table}");
    }

    #[test]
    fn empty_roc_is_omitted_and_noted() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_report(&bundle(ConfusionMatrix::from_errors(5, 5, 1, 1)), dir.path()).unwrap();
        assert!(files.roc.is_none());
        assert!(!dir.path().join("roc.csv").exists());
        let v: Value = serde_json::from_slice(&fs::read(files.json).unwrap()).unwrap();
        assert!(v["roc"]["file"].is_null());
        assert!(v["roc"]["note"].as_str().unwrap().contains("omitted"));
    }

    #[test]
    fn json_round_trips_and_hash_ignores_timing() {
        let labels = [Label::Human, Label::Ai, Label::Ai, Label::Human];
        let scores = [0.1, 0.8, 0.35, 0.4];
        let mut b = bundle(ConfusionMatrix::from_errors(2, 2, 0, 1));
        b.roc = Some(roc_curve(&labels, &scores).unwrap());
        b.auc = Some(0.75);
        b.train_accuracy = Some(0.9922);
        b.overfit_gap = Some(16.35);
        let dir = tempfile::tempdir().unwrap();
        let files = write_report(&b, dir.path()).unwrap();
        assert!(files.roc.is_some());
        let raw = fs::read(&files.json).unwrap();
        let back: MetricsBundle = serde_json::from_slice(&raw).unwrap();
        assert_eq!(back, MetricsBundle { roc: None, ..b.clone() });

        let v1: Value = serde_json::from_slice(&raw).unwrap();
        b.timing = Some(Timing {
            train_seconds: 99.0,
            inference_seconds: 9.0,
        });
        let files = write_report(&b, dir.path()).unwrap();
        let v2: Value = serde_json::from_slice(&fs::read(files.json).unwrap()).unwrap();
        assert_eq!(v1["content_sha256"], v2["content_sha256"]);
        assert_ne!(v1["timing"], v2["timing"]);
    }
}
