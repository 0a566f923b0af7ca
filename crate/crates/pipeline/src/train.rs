//! Minibatch training of the two-stream classifier.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use taxel_nn::{softmax_cross_entropy, AdamHyper, Tensor};
use taxel_twostream::{
    save_model, Modality, ModelManifest, Normalization, TwoStreamConfig, TwoStreamModel, TwoStreamOptimizer,
    MANIFEST_VERSION,
};

use crate::dataset::{Dataset, LabelKind, Sample, Split};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub modality: Modality,
    pub label_kind: LabelKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            learning_rate: 3e-3,
            modality: Modality::Fused,
            label_kind: LabelKind::Joint,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::config("epochs, batch_size and learning_rate must be positive"));
        }
        Ok(())
    }

    fn hyper(&self) -> AdamHyper {
        AdamHyper { lr: self.learning_rate, ..AdamHyper::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Accuracy for classifiers, MAE (N) for the force regressor.
    pub train_metric: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub metric: String,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
}

impl History {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("epoch,train_loss,val_loss,train_{m},val_{m}\n", m = self.metric);
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.train_loss, e.val_loss, e.train_metric, e.val_metric));
        }
        out
    }
}

/// A normalized network input with its class index.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub depth: Tensor,
    pub force: Tensor,
    pub label: usize,
}

pub fn normalize(sample: &Sample, norm: &Normalization) -> (Tensor, Tensor) {
    let mut depth = sample.inputs.depth.clone();
    let plane = depth.len() / 3;
    for (c, chunk) in depth.data_mut().chunks_mut(plane).enumerate() {
        chunk.iter_mut().for_each(|v| *v = (*v - norm.depth_mean[c]) / norm.depth_std[c]);
    }
    let mut force = sample.inputs.force.clone();
    force.scale(1.0 / norm.force_scale);
    (depth, force)
}

pub fn prepare(samples: &[&Sample], norm: &Normalization, kind: LabelKind) -> Vec<Prepared> {
    samples
        .iter()
        .map(|s| {
            let (depth, force) = normalize(s, norm);
            Prepared { depth, force, label: s.record.labels.get(kind) }
        })
        .collect()
}

/// Mean cross-entropy and accuracy of `model` over `set`.
pub fn score(model: &TwoStreamModel, set: &[Prepared]) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for p in set {
        let (out, _) = model.forward(&p.depth, &p.force)?;
        loss += softmax_cross_entropy(&out.logits, p.label)?.0;
        correct += usize::from(out.logits.argmax() == p.label);
    }
    Ok((loss / set.len() as f64, correct as f64 / set.len() as f64))
}

/// Trains `model` in place on `train`, keeping the parameters of the epoch
/// with the best validation accuracy (ties go to lower validation loss).
///
/// On a non-finite loss or gradient the best parameters so far are restored
/// and `Error::Diverged` is returned; the caller decides where to save them.
pub fn fit(
    model: &mut TwoStreamModel,
    train: &[Prepared],
    val: &[Prepared],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<History> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::config("empty training set"));
    }
    let classes = model.config().classes;
    if let Some(p) = train.iter().chain(val).find(|p| p.label >= classes) {
        return Err(Error::config(format!("label {} out of range for {classes} classes", p.label)));
    }
    let mut opt = TwoStreamOptimizer::new(model, cfg.hyper());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SHUFFLE_STREAM));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History { metric: "accuracy".into(), epochs: Vec::new(), best_epoch: 0 };
    let mut best: Option<(f64, f64, TwoStreamModel)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let step = |model: &TwoStreamModel| -> Result<(f64, usize, taxel_twostream::ModelGrads)> {
                let mut grads = model.zero_grads();
                let (mut loss_sum, mut correct) = (0.0, 0usize);
                for &i in batch {
                    let p = &train[i];
                    let (out, tape) = model.forward(&p.depth, &p.force)?;
                    let (loss, dl) = softmax_cross_entropy(&out.logits, p.label)?;
                    loss_sum += loss;
                    correct += usize::from(out.logits.argmax() == p.label);
                    grads.accumulate(&model.backward(tape, &dl)?);
                }
                grads.scale(1.0 / batch.len() as f64);
                Ok((loss_sum, correct, grads))
            };
            let outcome = match step(model) {
                // labels are checked up front, so a domain failure here is a non-finite value
                Err(Error::Nn(taxel_nn::Error::Domain(_))) => None,
                Err(e) => return Err(e),
                Ok((loss, _, grads)) if !loss.is_finite() || !grads.all_finite() => None,
                Ok(ok) => Some(ok),
            };
            let Some((loss, hits, grads)) = outcome else {
                if let Some((_, _, m)) = best {
                    *model = m;
                }
                return Err(Error::Diverged { epoch, checkpoint: None });
            };
            loss_sum += loss;
            correct += hits;
            opt.step(model, &grads)?;
        }
        let (val_loss, val_acc) = score(model, val)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            train_metric: correct as f64 / train.len() as f64,
            val_metric: val_acc,
        };
        log::info!(
            "epoch {epoch}: train loss {:.4} acc {:.3}, val loss {:.4} acc {:.3}",
            record.train_loss,
            record.train_metric,
            val_loss,
            val_acc
        );
        history.epochs.push(record);
        let better = match &best {
            None => true,
            Some((acc, loss, _)) => val_acc > *acc || (val_acc == *acc && val_loss < *loss),
        };
        if better {
            best = Some((val_acc, val_loss, model.clone()));
            history.best_epoch = epoch;
        }
    }
    if let Some((_, _, m)) = best {
        *model = m;
    }
    Ok(history)
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: TwoStreamModel,
    pub manifest: ModelManifest,
    pub history: History,
}

pub fn model_config(ds: &Dataset, cfg: &TrainConfig) -> Result<TwoStreamConfig> {
    let first = ds.samples.first().ok_or_else(|| Error::config("empty dataset"))?;
    let shape = first.inputs.depth.shape();
    Ok(TwoStreamConfig {
        depth_height: shape[1],
        depth_width: shape[2],
        window: first.inputs.force.shape()[1],
        classes: ds.manifest.classes(cfg.label_kind),
        modality: cfg.modality,
    })
}

/// Trains a classifier on the train split, selecting on the validation split.
///
/// With `checkpoint`, the selected model is saved there; after a divergence the
/// last good parameters are saved there before the error is returned.
pub fn train_classifier(ds: &Dataset, cfg: &TrainConfig, seed: u64, checkpoint: Option<&Path>) -> Result<Trained> {
    let norm = ds.normalization()?;
    let config = model_config(ds, cfg)?;
    let train = prepare(&ds.split(Split::Train), &norm, cfg.label_kind);
    let val = prepare(&ds.split(Split::Val), &norm, cfg.label_kind);
    let mut model = TwoStreamModel::new(config, derive_seed(seed, INIT_STREAM))?;
    let manifest = ModelManifest {
        version: MANIFEST_VERSION.into(),
        config,
        window_dt: ds.manifest.config.inputs.window_dt,
        label_kind: cfg.label_kind.name().into(),
        class_labels: ds.manifest.class_labels(cfg.label_kind),
        normalization: norm,
        extra: serde_json::json!({
            "train": cfg,
            "seed": seed,
            "dataset_seed": ds.manifest.master_seed,
        }),
    };
    let history = match fit(&mut model, &train, &val, cfg, seed) {
        Ok(h) => h,
        Err(Error::Diverged { epoch, .. }) => {
            let kept: Option<PathBuf> = match checkpoint {
                Some(path) => {
                    save_model(path, &model, &manifest)?;
                    Some(path.to_path_buf())
                }
                None => None,
            };
            return Err(Error::Diverged { epoch, checkpoint: kept });
        }
        Err(e) => return Err(e),
    };
    let mut manifest = manifest;
    manifest.extra["best_epoch"] = serde_json::json!(history.best_epoch);
    if let Some(path) = checkpoint {
        save_model(path, &model, &manifest)?;
    }
    Ok(Trained { model, manifest, history })
}
