//! Force-from-image regression on simulated presses.
//!
//! The elastomer carries the full press force, `F = k2 x2`, so a frame
//! difference determines the force through the imprint depth alone. Presses
//! run to the full scale or the linear-regime limit, whichever comes first,
//! and frames are drawn uniformly in time.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use taxel_core::optics::io::quantize_frame;
use taxel_core::optics::{Placement, ShapeKind};
use taxel_nn::{Adam, AdamHyper, Tensor};
use taxel_twostream::{ForceRegressor, RegressorScaling, FORCE_FULL_SCALE};

use crate::error::{Error, Result};
use crate::sample::regressor_input;
use crate::scenario::{simulate_press, PressScenario, SimConfig};
use crate::seeding::derive_seed;
use crate::train::{EpochRecord, History};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub sim: SimConfig,
    pub train_presses: usize,
    pub val_presses: usize,
    pub test_presses: usize,
    /// Frames drawn from each training or validation press.
    pub frames_per_press: usize,
    pub downsample: usize,
    pub input_gain: f64,
    pub placement_jitter: f64,
    /// Degrees.
    pub rotation_jitter: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            train_presses: 1600,
            val_presses: 60,
            test_presses: 60,
            frames_per_press: 3,
            downsample: 2,
            input_gain: 4.0,
            placement_jitter: 0.25,
            rotation_jitter: 10.0,
            epochs: 25,
            batch_size: 16,
            learning_rate: 1e-3,
        }
    }
}

/// One labelled frame difference.
#[derive(Debug, Clone)]
pub struct ForceExample {
    pub input: Tensor,
    /// N.
    pub force: f64,
}

/// A held-out press: every frame with its true force and timestamp.
#[derive(Debug, Clone)]
pub struct PressRecord {
    pub scenario: PressScenario,
    pub times: Vec<f64>,
    pub inputs: Vec<Tensor>,
    pub forces: Vec<f64>,
}

const TRAIN_STREAM: u64 = 1;
const VAL_STREAM: u64 = 2;
const TEST_STREAM: u64 = 3;
const INIT_STREAM: u64 = 4;
const SHUFFLE_STREAM: u64 = 5;

fn random_scenario(cfg: &RegressionConfig, rng: &mut ChaCha8Rng) -> PressScenario {
    let sim = &cfg.sim;
    let shape = ShapeKind::ALL[rng.random_range(0..ShapeKind::ALL.len())];
    let [lo, hi] = sim.hardness_range;
    let hardness = rng.random_range(lo..=hi);
    let k1 = sim.hardness_scale * hardness;
    let k_total = k1 * sim.elastomer_stiffness / (k1 + sim.elastomer_stiffness);
    let depth = (FORCE_FULL_SCALE / k_total).min(sim.max_indentation);
    let mut jitter = |span: f64| if span > 0.0 { rng.random_range(-span..=span) } else { 0.0 };
    let placement = Placement {
        dx: jitter(cfg.placement_jitter),
        dy: jitter(cfg.placement_jitter),
        rotation: jitter(cfg.rotation_jitter).to_radians(),
    };
    sim.scenario(shape, hardness, depth).with_placement(placement).with_seed(rng.random())
}

/// Simulates `count` presses and keeps every frame, quantized to 8 bits as
/// stored on disk.
pub fn press_records(cfg: &RegressionConfig, count: usize, seed: u64) -> Result<Vec<PressRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let scenario = random_scenario(cfg, &mut rng);
            let sim = simulate_press(&scenario, &cfg.sim)?;
            let k_total = scenario.spring()?.total_stiffness();
            let w = &sim.window;
            let reference = quantize_frame(&w.reference);
            let inputs = w
                .frames
                .iter()
                .map(|f| regressor_input(&quantize_frame(f), &reference, cfg.downsample))
                .collect::<Result<Vec<_>>>()?;
            let forces = w.times.iter().map(|t| k_total * (scenario.speed * t).min(scenario.press_depth)).collect();
            Ok(PressRecord { scenario, times: w.times.clone(), inputs, forces })
        })
        .collect()
}

fn sample_frames(records: Vec<PressRecord>, per_press: usize, seed: u64) -> Vec<ForceExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(records.len() * per_press);
    for r in records {
        let mut idx: Vec<usize> = (0..r.inputs.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(per_press);
        idx.sort_unstable();
        for i in idx {
            out.push(ForceExample { input: r.inputs[i].clone(), force: r.forces[i] });
        }
    }
    out
}

/// Training and validation frames plus whole held-out test presses.
pub struct RegressionData {
    pub train: Vec<ForceExample>,
    pub val: Vec<ForceExample>,
    pub test: Vec<PressRecord>,
}

pub fn regression_data(cfg: &RegressionConfig, seed: u64) -> Result<RegressionData> {
    let train = press_records(cfg, cfg.train_presses, derive_seed(seed, TRAIN_STREAM))?;
    let val = press_records(cfg, cfg.val_presses, derive_seed(seed, VAL_STREAM))?;
    Ok(RegressionData {
        train: sample_frames(train, cfg.frames_per_press, derive_seed(seed, TRAIN_STREAM + 100)),
        val: sample_frames(val, cfg.frames_per_press, derive_seed(seed, VAL_STREAM + 100)),
        test: press_records(cfg, cfg.test_presses, derive_seed(seed, TEST_STREAM))?,
    })
}

/// Mean absolute error (N) over examples.
pub fn force_mae(r: &ForceRegressor, set: &[ForceExample]) -> Result<f64> {
    let mut sum = 0.0;
    for e in set {
        sum += (r.predict(&e.input)? - e.force).abs();
    }
    Ok(sum / set.len().max(1) as f64)
}

/// Cosine decay from `base` at epoch 1 towards zero after the last epoch.
fn cosine_lr(base: f64, epoch: usize, epochs: usize) -> f64 {
    let phase = (epoch - 1) as f64 / epochs as f64;
    0.5 * base * (1.0 + (std::f64::consts::PI * phase).cos())
}

/// Adam on the normalized squared error with a cosine learning-rate decay;
/// the epoch with the lowest validation MAE is returned.
pub fn train_regressor(
    cfg: &RegressionConfig,
    train: &[ForceExample],
    val: &[ForceExample],
    seed: u64,
) -> Result<(ForceRegressor, History)> {
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) || train.is_empty() {
        return Err(Error::config("regressor training needs positive epochs, batch size, learning rate and data"));
    }
    let shape = train[0].input.shape().to_vec();
    let scaling = RegressorScaling { input_gain: cfg.input_gain, force_scale: FORCE_FULL_SCALE };
    let mut reg = ForceRegressor::new(shape[1], shape[2], scaling, derive_seed(seed, INIT_STREAM))?;
    let mut opt = Adam::new(reg.network(), AdamHyper { lr: cfg.learning_rate, ..AdamHyper::default() });
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SHUFFLE_STREAM));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History { metric: "mae_n".into(), epochs: Vec::new(), best_epoch: 0 };
    let mut best: Option<(f64, ForceRegressor)> = None;
    for epoch in 1..=cfg.epochs {
        opt.hyper.lr = cosine_lr(cfg.learning_rate, epoch, cfg.epochs);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut abs_sum) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads: Vec<Tensor> = reg.network().params().iter().map(|p| Tensor::zeros(p.shape())).collect();
            for &i in batch {
                let e = &train[i];
                let (loss, g) = reg.loss_and_grads(&e.input, e.force)?;
                loss_sum += loss;
                abs_sum += loss.sqrt() * FORCE_FULL_SCALE;
                for (acc, d) in grads.iter_mut().zip(&g) {
                    acc.add_assign(d);
                }
            }
            if !loss_sum.is_finite() || !grads.iter().all(Tensor::all_finite) {
                return Err(Error::Diverged { epoch, checkpoint: None });
            }
            grads.iter_mut().for_each(|g| g.scale(1.0 / batch.len() as f64));
            opt.step(reg.network_mut(), &grads)?;
        }
        let val_mae = force_mae(&reg, val)?;
        let n = train.len() as f64;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            val_loss: val_mae / FORCE_FULL_SCALE,
            train_metric: abs_sum / n,
            val_metric: val_mae,
        });
        log::info!("regressor epoch {epoch}: train loss {:.3e}, val MAE {val_mae:.4} N", loss_sum / n);
        if best.as_ref().is_none_or(|(m, _)| val_mae < *m) {
            best = Some((val_mae, reg.clone()));
            history.best_epoch = epoch;
        }
    }
    Ok((best.map(|(_, r)| r).unwrap_or(reg), history))
}

/// Held-out evaluation over whole presses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub frames: usize,
    /// N.
    pub mae: f64,
    pub max_abs_error: f64,
    /// Largest drop between consecutive predictions within a press (N).
    pub worst_monotonicity_violation: f64,
    /// Relative error of the fitted force slope against `k_total v`, per press.
    pub slope_errors: Vec<f64>,
}

impl RegressionReport {
    pub fn mean_slope_error(&self) -> f64 {
        self.slope_errors.iter().sum::<f64>() / self.slope_errors.len().max(1) as f64
    }

    pub fn worst_slope_error(&self) -> f64 {
        self.slope_errors.iter().copied().fold(0.0, f64::max)
    }
}

fn fitted_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let var: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    cov / var
}

pub fn evaluate_regressor(r: &ForceRegressor, presses: &[PressRecord]) -> Result<RegressionReport> {
    let (mut frames, mut abs_sum, mut max_abs) = (0usize, 0.0f64, 0.0f64);
    let mut worst_drop = 0.0f64;
    let mut slope_errors = Vec::with_capacity(presses.len());
    for p in presses {
        let pred = p.inputs.iter().map(|x| r.predict(x)).collect::<taxel_nn::Result<Vec<_>>>()?;
        for (a, b) in pred.iter().zip(&p.forces) {
            abs_sum += (a - b).abs();
            max_abs = max_abs.max((a - b).abs());
        }
        frames += pred.len();
        for w in pred.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        let truth = p.scenario.spring()?.total_stiffness() * p.scenario.speed;
        slope_errors.push((fitted_slope(&p.times, &pred) - truth).abs() / truth);
    }
    Ok(RegressionReport {
        frames,
        mae: abs_sum / frames.max(1) as f64,
        max_abs_error: max_abs,
        worst_monotonicity_violation: worst_drop,
        slope_errors,
    })
}
