//! Hand-crafted-feature baseline: fitted contact radius and inferred
//! stiffness fed to a small MLP.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use taxel_nn::{softmax_cross_entropy, Adam, AdamHyper, LayerSpec, Network, NetworkSpec, Tensor};

use crate::dataset::{Dataset, LabelKind, Sample, Split};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::seeding::derive_seed;
use crate::train::{EpochRecord, History};

pub const BASELINE_FEATURES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub label_kind: LabelKind,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { hidden: 32, epochs: 300, batch_size: 32, learning_rate: 1e-2, label_kind: LabelKind::Joint }
    }
}

pub fn baseline_spec(hidden: usize, classes: usize) -> NetworkSpec {
    NetworkSpec::new(
        "baseline-mlp",
        &[BASELINE_FEATURES],
        vec![
            LayerSpec::Dense { inputs: BASELINE_FEATURES, outputs: hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: hidden, outputs: hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: hidden, outputs: classes },
        ],
    )
}

fn raw_features(s: &Sample) -> [f64; BASELINE_FEATURES] {
    [s.features.radius, s.features.stiffness]
}

/// Feature standardization fitted on the train split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub mean: [f64; BASELINE_FEATURES],
    pub std: [f64; BASELINE_FEATURES],
}

impl FeatureScaling {
    fn fit(samples: &[&Sample]) -> Self {
        let n = samples.len().max(1) as f64;
        let mut mean = [0.0; BASELINE_FEATURES];
        let mut std = [0.0; BASELINE_FEATURES];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(raw_features(s)) {
                *m += v / n;
            }
        }
        for s in samples {
            for ((sd, m), v) in std.iter_mut().zip(mean).zip(raw_features(s)) {
                *sd += (v - m) * (v - m) / n;
            }
        }
        Self { mean, std: std.map(|v| v.sqrt().max(1e-9)) }
    }

    pub fn apply(&self, s: &Sample) -> Tensor {
        let f = raw_features(s);
        Tensor::from_vec((0..BASELINE_FEATURES).map(|i| (f[i] - self.mean[i]) / self.std[i]).collect())
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub network: Network,
    pub scaling: FeatureScaling,
    pub history: History,
    pub report: EvalReport,
}

fn score(net: &Network, set: &[(Tensor, usize)]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0;
    for (x, y) in set {
        let logits = net.infer(x)?;
        loss += softmax_cross_entropy(&logits, *y)?.0;
        correct += usize::from(logits.argmax() == *y);
    }
    let n = set.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains the baseline MLP on the train split (best validation accuracy kept)
/// and reports on the test split.
pub fn manual_baseline(ds: &Dataset, cfg: &BaselineConfig, seed: u64) -> Result<BaselineOutcome> {
    if cfg.hidden == 0 || cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::config("baseline hidden width, epochs, batch size and learning rate must be positive"));
    }
    let kind = cfg.label_kind;
    let train_samples = ds.split(Split::Train);
    let scaling = FeatureScaling::fit(&train_samples);
    let encode = |v: Vec<&Sample>| -> Vec<(Tensor, usize)> {
        v.into_iter().map(|s| (scaling.apply(s), s.record.labels.get(kind))).collect()
    };
    let train = encode(train_samples);
    let val = encode(ds.split(Split::Val));
    let test = encode(ds.split(Split::Test));

    let mut net = Network::new(baseline_spec(cfg.hidden, ds.manifest.classes(kind)), derive_seed(seed, 1))?;
    let mut opt = Adam::new(&net, AdamHyper { lr: cfg.learning_rate, ..AdamHyper::default() });
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History { metric: "accuracy".into(), epochs: Vec::new(), best_epoch: 0 };
    let mut best: Option<(f64, f64, Network)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads: Vec<Tensor> = net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
            for &i in batch {
                let (x, y) = &train[i];
                let (logits, tape) = net.forward(x)?;
                let (loss, dl) = softmax_cross_entropy(&logits, *y)?;
                loss_sum += loss;
                for (g, d) in grads.iter_mut().zip(net.backward(tape, &dl)?.params) {
                    g.add_assign(&d);
                }
            }
            grads.iter_mut().for_each(|g| g.scale(1.0 / batch.len() as f64));
            opt.step(&mut net, &grads)?;
        }
        let (_, train_acc) = score(&net, &train)?;
        let (val_loss, val_acc) = score(&net, &val)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len().max(1) as f64,
            val_loss,
            train_metric: train_acc,
            val_metric: val_acc,
        });
        if best.as_ref().is_none_or(|(a, l, _)| val_acc > *a || (val_acc == *a && val_loss < *l)) {
            best = Some((val_acc, val_loss, net.clone()));
            history.best_epoch = epoch;
        }
    }
    let network = best.map(|(_, _, n)| n).unwrap_or(net);
    let pairs = test.iter().map(|(x, y)| Ok((*y, network.infer(x)?.argmax()))).collect::<Result<Vec<_>>>()?;
    let report = EvalReport::from_pairs(kind, ds.manifest.class_labels(kind), pairs)?;
    Ok(BaselineOutcome { network, scaling, history, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_takes_two_features() {
        let spec = baseline_spec(16, 32);
        assert_eq!(spec.input_shape, vec![2]);
        assert_eq!(spec.output_shape().unwrap(), vec![32]);
    }
}
