//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line with its
//! measured values and runtime; the test fails if any criterion fails.
//!
//! The criteria run sequentially inside one test so that runtimes are
//! measured without competing test threads.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxel_core::mechanics::{
    hertz_area, infer_stiffness, synth_force_sequence, HertzContact, PressTrajectory, ReconEval, SpringModel,
};
use taxel_core::optics::ShapeKind;
use taxel_core::optics::{
    calibrate_lut, fit_contact_region, height_field, lookup_gradients, normals_from_height, poisson_reconstruct,
    recon_mae, render, FrameGeometry, GradientField, ImprintSpec, LightRig,
};
use taxel_core::Grid;
use taxel_nn::{softmax, softmax_cross_entropy, LayerSpec, Network, NetworkSpec, Tensor};
use taxel_pipeline::dataset::{gen_dataset, load_dataset, GenConfig, GenOptions, LabelKind, Split};
use taxel_pipeline::eval::{evaluate, EvalReport};
use taxel_pipeline::regress::{evaluate_regressor, regression_data, train_regressor, RegressionConfig};
use taxel_pipeline::train::{train_classifier, TrainConfig};
use taxel_pipeline::{run_modality, Dataset};
use taxel_twostream::{load_model, save_model, Modality, TwoStreamConfig, TwoStreamModel};

const SEED: u64 = 20_240_917;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, limit: Option<Duration>, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = run();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed < l);
    let pass = out.pass && in_time;
    let limit_note = limit.map_or(String::new(), |l| format!(" (limit {:.0} s)", l.as_secs_f64()));
    let line = format!(
        "{} criterion {id} {name}: {}; runtime {:.2} s{limit_note}\n",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64()
    );
    // bypasses the harness capture so the lines appear in plain `cargo test` output
    let mut err = std::io::stderr().lock();
    err.write_all(line.as_bytes()).unwrap();
    err.flush().unwrap();
    pass
}

// ---- 1: reconstruction sweep ------------------------------------------------

fn sphere(radius: f64, z: f64, geom: &FrameGeometry) -> GradientField {
    normals_from_height(&height_field(&ImprintSpec::sphere(radius), z, geom).unwrap())
}

fn reconstruction_sweep() -> Outcome {
    let geom = FrameGeometry::new(160, 160, 0.04).unwrap();
    let rig = LightRig::default();
    let (reference, _) = render(&GradientField::zeros(&geom), &rig).unwrap();
    // calibrated on a different sphere than the one evaluated
    let calibration: Vec<_> = [0.3, 0.6, 0.9, 1.2]
        .iter()
        .map(|&z| {
            let g = sphere(3.0, z, &geom);
            (render(&g, &rig).unwrap().0, g)
        })
        .collect();
    let lut = calibrate_lut(&calibration, &reference, 16).unwrap();
    let evals: Vec<ReconEval> = [0.2, 0.4, 0.6, 0.8, 1.0]
        .iter()
        .map(|&z| {
            let (frame, _) = render(&sphere(5.0, z, &geom), &rig).unwrap();
            let depth = poisson_reconstruct(&lookup_gradients(&frame, &reference, &lut).unwrap());
            let area = fit_contact_region(&depth, 0.1 * z).unwrap().map_or(0.0, |f| f.area);
            ReconEval::new(hertz_area(&HertzContact::new(5.0, z).unwrap()), area).unwrap()
        })
        .collect();
    let mae = recon_mae(&evals, None).unwrap();
    let areas: Vec<String> = evals.iter().map(|e| format!("{:.2}/{:.2}", e.measured, e.theoretical)).collect();
    Outcome {
        pass: mae < 0.05,
        detail: format!("area MAE {mae:.4} < 0.05 (measured/theory mm²: {})", areas.join(", ")),
    }
}

// ---- 2: Poisson round trip --------------------------------------------------

fn analytic_field(geom: &FrameGeometry, f: impl Fn(f64, f64) -> (f64, f64)) -> GradientField {
    let mut g = GradientField::zeros(geom);
    for r in 0..geom.height {
        for c in 0..geom.width {
            let (x, y) = geom.pixel_xy(r, c);
            let (gx, gy) = f(x, y);
            g.gx[(r, c)] = gx;
            g.gy[(r, c)] = gy;
            g.mask[r * geom.width + c] = true;
        }
    }
    g
}

fn poisson_round_trip() -> Outcome {
    let geom = FrameGeometry::new(64, 64, 0.05).unwrap();
    let truth = Grid::from_fn(64, 64, |r, c| {
        let (x, y) = geom.pixel_xy(r, c);
        0.25 * (x * x + y * y)
    });
    let d = poisson_reconstruct(&analytic_field(&geom, |x, y| (0.5 * x, 0.5 * y)));
    let mean = truth.mean();
    let (lo, hi) = truth.min_max();
    let sq: f64 = d.depth.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - (b - mean)).powi(2)).sum();
    let rel_rmse = (sq / truth.len() as f64).sqrt() / (hi - lo);

    let g1 = analytic_field(&geom, |x, y| ((3.0 * x).sin(), x * y));
    let g2 = analytic_field(&geom, |x, y| (y * y, (2.0 * x - y).cos()));
    let (a, b) = (2.5, -0.75);
    let lhs = poisson_reconstruct(&g1.combine(a, &g2, b));
    let (d1, d2) = (poisson_reconstruct(&g1), poisson_reconstruct(&g2));
    let linearity = lhs
        .depth
        .as_slice()
        .iter()
        .zip(d1.depth.as_slice().iter().zip(d2.depth.as_slice()))
        .map(|(l, (x, y))| (l - (a * x + b * y)).abs())
        .fold(0.0, f64::max);
    Outcome {
        pass: rel_rmse <= 1e-3 && linearity <= 1e-10,
        detail: format!("RMSE/range {rel_rmse:.2e} ≤ 1e-3, linearity residual {linearity:.1e} ≤ 1e-10"),
    }
}

// ---- 3: stiffness round trip ------------------------------------------------

fn stiffness_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut clean, mut noisy) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let (k1, k2, v) = (rng.random_range(2.0..16.0), rng.random_range(6.0..24.0), rng.random_range(0.25..1.0));
        let model = SpringModel::new(k1, k2).unwrap();
        let seq = synth_force_sequence(&model, &PressTrajectory::to_depth(v, 0.05, 2.0).unwrap());
        clean = clean.max((infer_stiffness(&seq, v, k2).unwrap() - k1).abs() / k1);
        let seq = seq.with_noise(0.01, SEED + i).unwrap();
        noisy = noisy.max((infer_stiffness(&seq, v, k2).unwrap() - k1).abs() / k1);
    }
    Outcome {
        pass: clean < 1e-9 && noisy < 0.1,
        detail: format!("100 draws: worst noise-free error {clean:.1e} < 1e-9, worst 1%-noise error {noisy:.4} < 0.1"),
    }
}

// ---- 4: gradient checks -----------------------------------------------------

const FD_EPS: f64 = 1e-5;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Values bounded away from zero so ReLU kinks and pooling ties are not hit.
fn off_kink(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect()
}

fn layer_error(spec: NetworkSpec, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(spec, seed).unwrap();
    for p in net.params_mut().iter_mut().skip(1).step_by(2) {
        p.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.1..0.1));
    }
    let x = Tensor::new(net.input_shape().to_vec(), off_kink(net.input_shape().iter().product(), &mut rng)).unwrap();
    let coef = Tensor::new(net.output_shape(), off_kink(net.output_shape().iter().product(), &mut rng)).unwrap();
    let objective = |n: &Network, x: &Tensor| -> f64 {
        n.infer(x).unwrap().data().iter().zip(coef.data()).map(|(a, b)| a * b).sum()
    };
    let (_, tape) = net.forward(&x).unwrap();
    let grads = net.backward(tape, &coef).unwrap();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.data_mut()[i] += FD_EPS;
        xm.data_mut()[i] -= FD_EPS;
        worst =
            worst.max(rel_err(grads.input.data()[i], (objective(&net, &xp) - objective(&net, &xm)) / (2.0 * FD_EPS)));
    }
    for p in 0..net.params().len() {
        for i in 0..net.params()[p].len() {
            let orig = net.params()[p].data()[i];
            net.params_mut()[p].data_mut()[i] = orig + FD_EPS;
            let fp = objective(&net, &x);
            net.params_mut()[p].data_mut()[i] = orig - FD_EPS;
            let fm = objective(&net, &x);
            net.params_mut()[p].data_mut()[i] = orig;
            worst = worst.max(rel_err(grads.params[p].data()[i], (fp - fm) / (2.0 * FD_EPS)));
        }
    }
    worst
}

fn chain_error(modality: Modality, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = TwoStreamConfig { depth_height: 32, depth_width: 32, window: 64, classes: 6, modality };
    let mut networks = TwoStreamModel::new(config, seed).unwrap().into_networks();
    for net in networks.iter_mut() {
        for p in net.params_mut().iter_mut().skip(1).step_by(2) {
            p.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.05..0.05));
        }
    }
    let model = TwoStreamModel::from_networks(config, networks).unwrap();
    let d = Tensor::new(vec![3, 32, 32], (0..3072).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let f =
        Tensor::new(vec![1, 64], (0..64).map(|i| i as f64 / 64.0 + rng.random_range(-0.05..0.05)).collect()).unwrap();
    let label = 2;
    let loss = |m: &TwoStreamModel| softmax_cross_entropy(&m.forward(&d, &f).unwrap().0.logits, label).unwrap().0;
    let (out, tape) = model.forward(&d, &f).unwrap();
    let grads = model.backward(tape, &softmax_cross_entropy(&out.logits, label).unwrap().1).unwrap();
    let shifted = |net: usize, t: usize, i: usize, delta: f64| {
        let mut nets = model.clone().into_networks();
        nets[net].params_mut()[t].data_mut()[i] += delta;
        TwoStreamModel::from_networks(config, nets).unwrap()
    };
    let mut worst = 0.0f64;
    for net in 0..4 {
        if (net == 0 && !modality.uses_depth()) || (net == 1 && !modality.uses_force()) {
            continue;
        }
        for (t, p) in model.networks()[net].params().iter().enumerate() {
            for _ in 0..3 {
                let i = rng.random_range(0..p.len());
                let numeric = (loss(&shifted(net, t, i, FD_EPS)) - loss(&shifted(net, t, i, -FD_EPS))) / (2.0 * FD_EPS);
                worst = worst.max(rel_err(grads.params[net][t].data()[i], numeric));
            }
        }
    }
    worst
}

fn gradient_checks() -> Outcome {
    let specs = [
        ("dense", NetworkSpec::new("dense", &[7], vec![LayerSpec::Dense { inputs: 7, outputs: 5 }])),
        (
            "conv2d",
            NetworkSpec::new(
                "conv2d",
                &[2, 6, 5],
                vec![LayerSpec::Conv2d { in_channels: 2, out_channels: 3, kernel: 3 }],
            ),
        ),
        (
            "conv1d",
            NetworkSpec::new(
                "conv1d",
                &[2, 11],
                vec![LayerSpec::Conv1d { in_channels: 2, out_channels: 3, kernel: 5 }],
            ),
        ),
        ("maxpool2d", NetworkSpec::new("maxpool2d", &[2, 6, 6], vec![LayerSpec::Maxpool2d { size: 2 }])),
        ("maxpool1d", NetworkSpec::new("maxpool1d", &[3, 10], vec![LayerSpec::Maxpool1d { size: 2 }])),
        ("global-avg-pool", NetworkSpec::new("gap", &[3, 4, 5], vec![LayerSpec::GlobalAvgPool])),
        ("relu", NetworkSpec::new("relu", &[13], vec![LayerSpec::Relu])),
        ("sigmoid", NetworkSpec::new("sigmoid", &[13], vec![LayerSpec::Sigmoid])),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, spec) in specs {
        let e = (0..3).map(|s| layer_error(spec.clone(), s)).fold(0.0, f64::max);
        worst = worst.max(e);
        parts.push(format!("{name} {e:.1e}"));
    }
    for modality in [Modality::Fused, Modality::GeometryOnly, Modality::ForceOnly] {
        let e = chain_error(modality, 5);
        worst = worst.max(e);
        parts.push(format!("chain/{} {e:.1e}", modality.name()));
    }
    Outcome { pass: worst < 1e-4, detail: format!("worst relative error {worst:.1e} < 1e-4 ({})", parts.join(", ")) }
}

// ---- 5: force regression ----------------------------------------------------

fn force_regression() -> Outcome {
    let cfg = RegressionConfig::default();
    let data = regression_data(&cfg, SEED).unwrap();
    let (reg, _) = train_regressor(&cfg, &data.train, &data.val, SEED).unwrap();
    let r = evaluate_regressor(&reg, &data.test).unwrap();
    let within = r.slope_errors.iter().filter(|e| **e <= 0.05).count();
    Outcome {
        pass: r.mae <= 0.12 && r.worst_monotonicity_violation <= 0.2 && r.mean_slope_error() <= 0.05,
        detail: format!(
            "held-out MAE {:.4} N ≤ 0.12 over {} frames; worst in-press drop {:.3} N ≤ 0.2; mean slope error {:.3} ≤ 0.05 ({}/{} presses within 5%, worst {:.3})",
            r.mae,
            r.frames,
            r.worst_monotonicity_violation,
            r.mean_slope_error(),
            within,
            r.slope_errors.len(),
            r.worst_slope_error()
        ),
    }
}

// ---- 6 & 7: classification and ablation ------------------------------------

fn classification(ds: &Dataset, fused: &taxel_pipeline::ModalityRun) -> Outcome {
    let t = &fused.trained;
    let shape = evaluate(&t.model, &t.manifest, ds, Split::Test, LabelKind::Shape).unwrap();
    let hardness = evaluate(&t.model, &t.manifest, ds, Split::Test, LabelKind::Hardness).unwrap();
    Outcome {
        pass: shape.accuracy >= 0.95 && hardness.accuracy >= 0.90,
        detail: format!(
            "{} test samples: shape accuracy {:.4} ≥ 0.95, hardness accuracy {:.4} ≥ 0.90 (joint model, best epoch {})",
            shape.total, shape.accuracy, hardness.accuracy, t.history.best_epoch
        ),
    }
}

fn ablation(ds: &Dataset, cfg: &TrainConfig, fused: &taxel_pipeline::ModalityRun) -> Outcome {
    let geometry = run_modality(ds, cfg, SEED, Modality::GeometryOnly).unwrap();
    let force = run_modality(ds, cfg, SEED, Modality::ForceOnly).unwrap();
    let (f, g, h) = (fused.report.accuracy, geometry.report.accuracy, force.report.accuracy);
    let margin = 100.0 * (f - g.max(h));
    Outcome {
        pass: f >= g && f >= h && margin >= 5.0,
        detail: format!(
            "joint accuracy fused {f:.4}, geometry-only {g:.4}, force-only {h:.4}; margin {margin:.1} pp ≥ 5"
        ),
    }
}

// ---- 8: determinism and formats ---------------------------------------------

fn small_config() -> GenConfig {
    GenConfig {
        shapes: vec![ShapeKind::Circle, ShapeKind::Triangle],
        hardness_grades: vec![20.0, 60.0],
        press_depths: vec![0.4, 1.0],
        repetitions: 5,
        ..GenConfig::default()
    }
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn property_checks() -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases: 48, failure_persistence: None, ..Config::default() });
    let config =
        TwoStreamConfig { depth_height: 32, depth_width: 32, window: 64, classes: 32, modality: Modality::Fused };
    let model = TwoStreamModel::new(config, 3).unwrap();
    runner
        .run(&(any::<u64>(), 0.01f64..4.0), |(seed, scale)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d =
                Tensor::new(vec![3, 32, 32], (0..3072).map(|_| scale * rng.random_range(-1.0..1.0)).collect()).unwrap();
            let f = Tensor::new(vec![1, 64], (0..64).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
            let (out, _) = model.forward(&d, &f).unwrap();
            prop_assert!(out.weights.data().iter().all(|w| *w > 0.0 && *w < 1.0));
            prop_assert!((out.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            Ok(())
        })
        .map_err(|e| format!("attention/softmax: {e}"))?;
    runner
        .run(&prop::collection::vec(-30.0f64..30.0, 2..40), |logits| {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            Ok(())
        })
        .map_err(|e| format!("softmax: {e}"))?;
    runner
        .run(&(2usize..10, prop::collection::vec((0usize..100, 0usize..100), 0..300)), |(c, raw)| {
            let pairs: Vec<(usize, usize)> = raw.iter().map(|(t, p)| (t % c, p % c)).collect();
            let labels = (0..c).map(|i| format!("c{i}")).collect();
            let r = EvalReport::from_pairs(LabelKind::Joint, labels, pairs.clone()).unwrap();
            prop_assert_eq!(r.total, pairs.len());
            prop_assert_eq!(r.correct + r.off_diagonal(), r.total);
            for k in 0..c {
                prop_assert_eq!(r.confusion[k].iter().sum::<usize>(), pairs.iter().filter(|p| p.0 == k).count());
            }
            let trace: usize = (0..c).map(|k| r.confusion[k][k]).sum();
            if r.total > 0 {
                prop_assert!((r.accuracy - trace as f64 / r.total as f64).abs() < 1e-15);
            }
            Ok(())
        })
        .map_err(|e| format!("confusion accounting: {e}"))?;
    Ok(())
}

fn determinism(scratch: &Path) -> Outcome {
    let cfg = small_config();
    let (a, b) = (scratch.join("data-a"), scratch.join("data-b"));
    gen_dataset(&cfg, SEED, &a, GenOptions::default()).unwrap();
    gen_dataset(&cfg, SEED, &b, GenOptions { jobs: 2, regressor: None }).unwrap();
    let (ta, tb) = (tree_bytes(&a), tree_bytes(&b));
    let dataset_same = ta == tb;

    let ds = load_dataset(&a).unwrap();
    let train = TrainConfig { epochs: 2, batch_size: 4, ..TrainConfig::default() };
    let (ck1, ck2) = (scratch.join("m1.ckpt"), scratch.join("m2.ckpt"));
    let t1 = train_classifier(&ds, &train, SEED, Some(&ck1)).unwrap();
    let t2 = train_classifier(&ds, &train, SEED, Some(&ck2)).unwrap();
    let training_same =
        std::fs::read(&ck1).unwrap() == std::fs::read(&ck2).unwrap() && t1.history.to_csv() == t2.history.to_csv();

    let mut emitted = Vec::new();
    for (i, t) in [&t1, &t2].iter().enumerate() {
        let r = evaluate(&t.model, &t.manifest, &ds, Split::Test, LabelKind::Joint).unwrap();
        let (json, csv) = (scratch.join(format!("report{i}.json")), scratch.join(format!("confusion{i}.csv")));
        r.write(&json, &csv).unwrap();
        emitted.push((std::fs::read(json).unwrap(), std::fs::read(csv).unwrap()));
    }
    let report_same = emitted[0] == emitted[1];

    let (model, manifest) = load_model(&ck1).unwrap();
    let resaved = scratch.join("resaved.ckpt");
    save_model(&resaved, &model, &manifest).unwrap();
    let checkpoint_exact = std::fs::read(&ck1).unwrap() == std::fs::read(&resaved).unwrap()
        && model.networks().iter().zip(t1.model.networks()).all(|(a, b)| a.params() == b.params());

    let properties = property_checks();
    Outcome {
        pass: dataset_same && training_same && report_same && checkpoint_exact && properties.is_ok(),
        detail: format!(
            "dataset bytes identical {dataset_same} ({} files, serial vs 2 jobs), training identical {training_same}, report identical {report_same}, checkpoint round trip exact {checkpoint_exact}, properties {}",
            ta.len(),
            properties.as_ref().map_or_else(|e| e.clone(), |_| "hold".into())
        ),
    }
}

#[test]
#[allow(clippy::vec_init_then_push)] // criteria interleave with shared setup
fn acceptance() {
    let scratch = tempfile::tempdir().unwrap();
    let mut passed = Vec::new();
    passed.push(report(1, "reconstruction sweep", Some(Duration::from_secs(30)), reconstruction_sweep));
    passed.push(report(2, "Poisson round trip", Some(Duration::from_secs(1)), poisson_round_trip));
    passed.push(report(3, "stiffness round trip", Some(Duration::from_secs(1)), stiffness_round_trip));
    passed.push(report(4, "gradient checks", Some(Duration::from_secs(60)), gradient_checks));
    passed.push(report(5, "force regression", Some(Duration::from_secs(300)), force_regression));

    // criterion 6 is timed end to end: generation, loading, training, evaluation
    let train = TrainConfig::default();
    let data_dir = scratch.path().join("default");
    let mut shared = None;
    passed.push(report(6, "classification", Some(Duration::from_secs(600)), || {
        gen_dataset(&GenConfig::default(), SEED, &data_dir, GenOptions::default()).unwrap();
        let ds = load_dataset(&data_dir).unwrap();
        let fused = run_modality(&ds, &train, SEED, Modality::Fused).unwrap();
        let out = classification(&ds, &fused);
        shared = Some((ds, fused));
        out
    }));
    let (ds, fused) = shared.expect("dataset and fused model from criterion 6");
    passed.push(report(7, "fusion-dominance ablation", None, || ablation(&ds, &train, &fused)));
    passed.push(report(8, "determinism and formats", None, || determinism(scratch.path())));

    let failed: Vec<usize> = passed.iter().enumerate().filter(|(_, p)| !**p).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
