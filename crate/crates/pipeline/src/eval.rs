//! Confusion-matrix evaluation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use taxel_twostream::{ModelManifest, TwoStreamModel};

use crate::dataset::{write_json, Dataset, LabelKind, Split};
use crate::error::{Error, Result};
use crate::train::normalize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub label_kind: LabelKind,
    pub class_labels: Vec<String>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `None` for classes absent from the evaluated split.
    pub per_class_accuracy: Vec<Option<f64>>,
}

impl EvalReport {
    /// Report over `(truth, predicted)` pairs.
    pub fn from_pairs(
        label_kind: LabelKind,
        class_labels: Vec<String>,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let c = class_labels.len();
        let mut confusion = vec![vec![0usize; c]; c];
        for (t, p) in pairs {
            if t >= c || p >= c {
                return Err(Error::config(format!("class index out of range for {c} classes")));
            }
            confusion[t][p] += 1;
        }
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..c).map(|i| confusion[i][i]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: usize = row.iter().sum();
                (n > 0).then(|| row[i] as f64 / n as f64)
            })
            .collect();
        let accuracy = if total > 0 { correct as f64 / total as f64 } else { 0.0 };
        Ok(Self { label_kind, class_labels, confusion, total, correct, accuracy, per_class_accuracy })
    }

    pub fn classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn off_diagonal(&self) -> usize {
        self.total - self.correct
    }

    /// Row label, then one column per predicted class.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for l in &self.class_labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (label, row) in self.class_labels.iter().zip(&self.confusion) {
            out.push_str(label);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, json: &Path, csv: &Path) -> Result<()> {
        write_json(json, self)?;
        std::fs::write(csv, self.confusion_csv()).map_err(|e| Error::io(csv, e))
    }
}

/// Probabilities over the classes of `target`, summing a joint distribution
/// over the other factor when the model was trained on joint labels.
pub fn marginalize(probs: &[f64], trained: LabelKind, target: LabelKind, hardness_classes: usize) -> Result<Vec<f64>> {
    if trained == target {
        return Ok(probs.to_vec());
    }
    if trained != LabelKind::Joint || hardness_classes == 0 || !probs.len().is_multiple_of(hardness_classes) {
        return Err(Error::config(format!(
            "a {} model cannot be evaluated on {} labels",
            trained.name(),
            target.name()
        )));
    }
    let shapes = probs.len() / hardness_classes;
    Ok(match target {
        LabelKind::Shape => {
            (0..shapes).map(|s| probs[s * hardness_classes..(s + 1) * hardness_classes].iter().sum()).collect()
        }
        LabelKind::Hardness => {
            (0..hardness_classes).map(|h| (0..shapes).map(|s| probs[s * hardness_classes + h]).sum()).collect()
        }
        LabelKind::Joint => unreachable!("handled above"),
    })
}

fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().fold(0, |best, (i, v)| if *v > p[best] { i } else { best })
}

/// Deterministic pass of `model` over one split of `ds`.
pub fn evaluate(
    model: &TwoStreamModel,
    manifest: &ModelManifest,
    ds: &Dataset,
    split: Split,
    kind: LabelKind,
) -> Result<EvalReport> {
    let trained = LabelKind::parse(&manifest.label_kind)
        .ok_or_else(|| Error::config(format!("unknown label kind {}", manifest.label_kind)))?;
    if manifest.class_labels != ds.manifest.class_labels(trained) {
        return Err(Error::config("model class labels do not match the dataset"));
    }
    let hardness_classes = ds.manifest.hardness_labels.len();
    let pairs = ds
        .split(split)
        .into_iter()
        .map(|s| {
            let (depth, force) = normalize(s, &manifest.normalization);
            let probs = model.predict(&depth, &force)?;
            let p = marginalize(&probs, trained, kind, hardness_classes)?;
            Ok((s.record.labels.get(kind), argmax(&p)))
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_pairs(kind, ds.manifest.class_labels(kind), pairs)
}
