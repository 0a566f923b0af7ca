use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use taxel_core::mechanics::{hertz_area, HertzContact, ReconEval};
use taxel_core::optics::io::{
    quantize_frame, read_frame_png, read_lut, sidecar_path, write_depth_raw, write_frame_png, write_lut,
};
use taxel_core::optics::{fit_contact_region, recon_mae, Placement, ShapeKind};
use taxel_pipeline::calibration::sphere_press;
use taxel_pipeline::dataset::{read_manifest, write_force_csv};
use taxel_pipeline::sample::decode_frame;
use taxel_pipeline::{
    ablate, calibrate_sensor, evaluate, evaluate_regressor, gen_dataset, load_dataset, manual_baseline,
    regression_data, simulate_press, train_classifier, train_regressor, BaselineConfig, CalibrationConfig, Error,
    EvalReport, GenConfig, GenOptions, History, LabelKind, RegressionConfig, Result, SimConfig, TrainConfig,
};
use taxel_twostream::{load_model, load_regressor, save_model, save_regressor};

use crate::args::{Command, TaskArg};
use crate::report::collate;
use crate::run::{fresh_dir, load_config, require, to_json, write_once, ResolvedRun};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenData { config, seed, out, jobs, regressor } => {
            let (cfg, replayed) = load_config::<GenConfig>(config.config.as_deref(), "gen-data")?;
            let seed = seed.seed.or(replayed).unwrap_or(0);
            cfg.validate()?;
            let regressor_path = regressor.as_deref().map(|p| require(p, "--regressor")).transpose()?;
            fresh_dir(&out)?;
            let regressor = regressor_path.as_deref().map(load_regressor).transpose()?;
            let manifest = gen_dataset(&cfg, seed, &out, GenOptions { jobs, regressor: regressor.as_ref() })?;
            let mut run = ResolvedRun::new("gen-data", Some(seed), &cfg)?;
            if let Some(p) = &regressor_path {
                run = run.input("regressor", p.display());
            }
            run.write(&out)?;
            println!("{} samples written to {}", manifest.samples.len(), out.display());
        }
        Command::Calibrate { config, out } => {
            let (cfg, _) = load_config::<CalibrateConfig>(config.config.as_deref(), "calibrate")?;
            cfg.validate()?;
            fresh_dir(&out)?;
            let summary = calibrate(&cfg, &out)?;
            ResolvedRun::new("calibrate", None, &cfg)?.write(&out)?;
            println!(
                "lookup table {:.1}% filled; sphere sweep area MAE {:.4}",
                100.0 * summary.fill_fraction,
                summary.area_mae
            );
        }
        Command::Reconstruct { frame, reference, lut, out, pitch } => {
            let (frame, reference, lut) =
                (require(&frame, "--frame")?, require(&reference, "--ref")?, require(&lut, "--lut")?);
            reconstruct(&frame, &reference, &lut, &out, pitch)?;
        }
        Command::Press { config, seed, shape, hardness, depth, dx, dy, rotation, lut, out } => {
            let (sim, replayed) = load_config::<SimConfig>(config.config.as_deref(), "press")?;
            let seed = seed.seed.or(replayed).unwrap_or(0);
            let lut = lut.as_deref().map(|p| require(p, "--lut")).transpose()?;
            let placement = Placement { dx, dy, rotation: rotation.to_radians() };
            let spec = PressSpec { shape: shape.into(), hardness, depth, placement };
            fresh_dir(&out)?;
            let summary = press(&sim, &spec, seed, lut.as_deref(), &out)?;
            let mut run = ResolvedRun::new("press", Some(seed), &sim)?
                .input("shape", spec.shape.name())
                .input("hardness", hardness)
                .input("depth", depth)
                .input("dx", dx)
                .input("dy", dy)
                .input("rotation", rotation);
            if let Some(p) = &lut {
                run = run.input("lut", p.display());
            }
            run.write(&out)?;
            println!("{} frames, peak force {:.3} N", summary.frames, summary.peak_force);
        }
        Command::Train { config, seed, task, data, modality, labels, out } => match task {
            TaskArg::Classifier => {
                let (mut cfg, replayed) = load_config::<TrainConfig>(config.config.as_deref(), "train")?;
                let seed = seed.seed.or(replayed).unwrap_or(0);
                if let Some(m) = modality {
                    cfg.modality = m.into();
                }
                if let Some(l) = labels {
                    cfg.label_kind = l.into();
                }
                cfg.validate()?;
                let data = data.ok_or_else(|| Error::config("--data is required to train a classifier"))?;
                let data = require(&data, "--data")?;
                fresh_dir(&out)?;
                let ds = load_dataset(&data)?;
                let trained = train_classifier(&ds, &cfg, seed, Some(&out.join("model.ckpt")))?;
                write_history(&out, "history", &trained.history)?;
                ResolvedRun::new("train", Some(seed), &cfg)?
                    .input("task", "classifier")
                    .input("data", data.display())
                    .write(&out)?;
                let best = trained.history.best().map_or(0.0, |e| e.val_metric);
                println!("best epoch {} with validation accuracy {best:.3}", trained.history.best_epoch);
            }
            TaskArg::Regressor => {
                if data.is_some() || modality.is_some() || labels.is_some() {
                    return Err(Error::config(
                        "the regressor synthesizes its own presses; --data, --modality and --labels do not apply",
                    ));
                }
                let (cfg, replayed) = load_config::<RegressionConfig>(config.config.as_deref(), "train")?;
                let seed = seed.seed.or(replayed).unwrap_or(0);
                fresh_dir(&out)?;
                let split = regression_data(&cfg, seed)?;
                let (regressor, history) = train_regressor(&cfg, &split.train, &split.val, seed)?;
                save_regressor(&out.join("regressor.ckpt"), &regressor)?;
                write_history(&out, "history", &history)?;
                let report = evaluate_regressor(&regressor, &split.test)?;
                write_once(&out.join("regression_report.json"), to_json(&report)?.as_bytes())?;
                ResolvedRun::new("train", Some(seed), &cfg)?.input("task", "regressor").write(&out)?;
                println!("held-out force MAE {:.4} N over {} frames", report.mae, report.frames);
            }
        },
        Command::Eval { model, data, split, labels, out } => {
            let (model_path, data) = (require(&model, "--model")?, require(&data, "--data")?);
            let (model, manifest) = load_model(&model_path)?;
            let kind = match labels {
                Some(l) => l.into(),
                None => LabelKind::parse(&manifest.label_kind)
                    .ok_or_else(|| Error::config(format!("unknown label kind {}", manifest.label_kind)))?,
            };
            fresh_dir(&out)?;
            let ds = load_dataset(&data)?;
            let report = evaluate(&model, &manifest, &ds, split.into(), kind)?;
            write_report(&out, "", &report)?;
            ResolvedRun::new("eval", None, &serde_json::Value::Null)?
                .input("model", model_path.display())
                .input("data", data.display())
                .input("split", taxel_pipeline::Split::from(split).name())
                .input("labels", kind.name())
                .write(&out)?;
            println!("{} accuracy {:.4} ({}/{})", kind.name(), report.accuracy, report.correct, report.total);
        }
        Command::Ablate { config, seed, data, labels, out } => {
            let (mut cfg, replayed) = load_config::<TrainConfig>(config.config.as_deref(), "ablate")?;
            let seed = seed.seed.or(replayed).unwrap_or(0);
            if let Some(l) = labels {
                cfg.label_kind = l.into();
            }
            cfg.validate()?;
            let data = require(&data, "--data")?;
            fresh_dir(&out)?;
            let ds = load_dataset(&data)?;
            let result = ablate(&ds, &cfg, seed)?;
            for run in result.runs() {
                let name = run.modality.name();
                save_model(&out.join(format!("model_{name}.ckpt")), &run.trained.model, &run.trained.manifest)?;
                write_history(&out, &format!("history_{name}"), &run.trained.history)?;
                write_report(&out, &format!("_{name}"), &run.report)?;
            }
            let summary = result.summary(&cfg, seed);
            write_once(&out.join("summary.json"), to_json(&summary)?.as_bytes())?;
            ResolvedRun::new("ablate", Some(seed), &summary.train)?.input("data", data.display()).write(&out)?;
            if !summary.fused_dominates {
                log::warn!("fused model does not dominate the single-modality models");
            }
            println!(
                "fused {:.4}, geometry-only {:.4}, force-only {:.4}, margin {:+.1} pp",
                summary.fused_accuracy, summary.geometry_only_accuracy, summary.force_only_accuracy, summary.margin_pp
            );
        }
        Command::Baseline { config, seed, data, out } => {
            let (cfg, replayed) = load_config::<BaselineConfig>(config.config.as_deref(), "baseline")?;
            let seed = seed.seed.or(replayed).unwrap_or(0);
            let data = require(&data, "--data")?;
            fresh_dir(&out)?;
            let ds = load_dataset(&data)?;
            let outcome = manual_baseline(&ds, &cfg, seed)?;
            write_history(&out, "history", &outcome.history)?;
            write_report(&out, "", &outcome.report)?;
            ResolvedRun::new("baseline", Some(seed), &cfg)?.input("data", data.display()).write(&out)?;
            println!("baseline {} accuracy {:.4}", cfg.label_kind.name(), outcome.report.accuracy);
        }
        Command::Report { runs, out } => {
            let runs = runs.iter().map(|r| require(r, "run")).collect::<Result<Vec<PathBuf>>>()?;
            let tables = collate(&runs)?;
            fresh_dir(&out)?;
            write_once(&out.join("metrics.csv"), tables.metrics_csv().as_bytes())?;
            write_once(&out.join("metrics.json"), to_json(&tables.metrics)?.as_bytes())?;
            write_once(&out.join("curves.csv"), tables.curves_csv().as_bytes())?;
            let mut run = ResolvedRun::new("report", None, &serde_json::Value::Null)?;
            for (i, r) in runs.iter().enumerate() {
                run = run.input(&format!("run.{i:03}"), r.display());
            }
            run.write(&out)?;
            println!("{} metrics from {} runs", tables.metrics.len(), runs.len());
        }
    }
    Ok(())
}

fn write_history(out: &Path, stem: &str, history: &History) -> Result<()> {
    write_once(&out.join(format!("{stem}.csv")), history.to_csv().as_bytes())?;
    write_once(&out.join(format!("{stem}.json")), to_json(history)?.as_bytes())
}

/// `report{suffix}.json` and `confusion{suffix}.csv`.
fn write_report(out: &Path, suffix: &str, report: &EvalReport) -> Result<()> {
    write_once(&out.join(format!("report{suffix}.json")), to_json(report)?.as_bytes())?;
    write_once(&out.join(format!("confusion{suffix}.csv")), report.confusion_csv().as_bytes())
}

/// Sphere presses used to check a freshly calibrated table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Sphere radius (mm).
    pub sphere_radius: f64,
    /// Indentation depths (mm).
    pub depths: Vec<f64>,
    /// Contact threshold as a fraction of the indentation depth.
    pub threshold_fraction: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { sphere_radius: 2.0, depths: vec![0.1, 0.2, 0.3, 0.4, 0.5], threshold_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub sim: SimConfig,
    pub calibration: CalibrationConfig,
    pub sweep: SweepConfig,
}

impl CalibrateConfig {
    fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.calibration.validate()?;
        let s = &self.sweep;
        if s.depths.is_empty() || s.depths.iter().any(|&z| !(z > 0.0 && z <= s.sphere_radius)) {
            return Err(Error::config("sweep depths must be nonempty and lie in (0, sphere_radius]"));
        }
        if !(s.threshold_fraction > 0.0 && s.threshold_fraction < 1.0) {
            return Err(Error::config("sweep threshold_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub depth: f64,
    pub theoretical_area: f64,
    pub measured_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub bins: usize,
    pub filled_cells: usize,
    pub fill_fraction: f64,
    /// Mean area error normalized by the largest theoretical area.
    pub area_mae: f64,
    pub sweep: Vec<SweepPoint>,
}

fn calibrate(cfg: &CalibrateConfig, out: &Path) -> Result<CalibrationSummary> {
    let (lut, reference) = calibrate_sensor(&cfg.sim, &cfg.calibration)?;
    write_lut(&lut, &out.join("lut.bin"))?;
    write_frame_png(&reference, &out.join("reference.png"))?;
    // decode what a camera would store
    let reference = quantize_frame(&reference);
    let r = cfg.sweep.sphere_radius;
    let mut sweep = Vec::with_capacity(cfg.sweep.depths.len());
    let mut evals = Vec::with_capacity(cfg.sweep.depths.len());
    for &z in &cfg.sweep.depths {
        let (frame, _) = sphere_press(&cfg.sim, r, z)?;
        let decoded = decode_frame(&quantize_frame(&frame), &reference, &lut)?;
        let measured = fit_contact_region(&decoded.depth, cfg.sweep.threshold_fraction * z)?.map_or(0.0, |f| f.area);
        let theoretical = hertz_area(&HertzContact::new(r, z)?);
        evals.push(ReconEval::new(theoretical, measured)?);
        sweep.push(SweepPoint { depth: z, theoretical_area: theoretical, measured_area: measured });
    }
    let summary = CalibrationSummary {
        bins: lut.bins(),
        filled_cells: lut.filled_cells(),
        fill_fraction: lut.fill_fraction(),
        area_mae: recon_mae(&evals, None)?,
        sweep,
    };
    let mut csv = String::from("depth_mm,theoretical_area_mm2,measured_area_mm2\n");
    for p in &summary.sweep {
        csv.push_str(&format!("{},{},{}\n", p.depth, p.theoretical_area, p.measured_area));
    }
    write_once(&out.join("sweep.csv"), csv.as_bytes())?;
    write_once(&out.join("calibration.json"), to_json(&summary)?.as_bytes())?;
    Ok(summary)
}

/// Writes `out` (+ sidecar) and `config.resolved.json` in its directory.
fn reconstruct(frame: &Path, reference: &Path, lut: &Path, out: &Path, pitch: f64) -> Result<()> {
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(Error::config(format!("--pitch must be positive, got {pitch}")));
    }
    let dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    for path in [out.to_path_buf(), sidecar_path(out), dir.join(crate::run::RESOLVED_FILE)] {
        if path.exists() {
            return Err(Error::config(format!("{} already exists; outputs are write-once", path.display())));
        }
    }
    let frame_img = read_frame_png(frame, pitch)?;
    let reference_img = read_frame_png(reference, pitch)?;
    let decoded = decode_frame(&frame_img, &reference_img, &read_lut(lut)?)?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_depth_raw(&decoded.depth, out)?;
    ResolvedRun::new("reconstruct", None, &serde_json::Value::Null)?
        .input("frame", frame.display())
        .input("ref", reference.display())
        .input("lut", lut.display())
        .input("pitch", pitch)
        .input("out", out.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()))
        .write(&dir)?;
    let (lo, hi) = decoded.depth.depth.min_max();
    println!(
        "{}×{} depth map, range [{lo:.4}, {hi:.4}] mm, {} contact pixels",
        decoded.depth.width(),
        decoded.depth.height(),
        decoded.gradients.mask_count()
    );
    Ok(())
}

struct PressSpec {
    shape: ShapeKind,
    hardness: f64,
    depth: f64,
    placement: Placement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressSummary {
    pub scenario: taxel_pipeline::PressScenario,
    pub object_stiffness: f64,
    pub total_stiffness: f64,
    pub final_imprint: f64,
    pub peak_force: f64,
    pub frames: usize,
    pub frame_times: Vec<f64>,
}

fn press(sim: &SimConfig, spec: &PressSpec, seed: u64, lut: Option<&Path>, out: &Path) -> Result<PressSummary> {
    let scenario = sim.scenario(spec.shape, spec.hardness, spec.depth).with_placement(spec.placement).with_seed(seed);
    let result = simulate_press(&scenario, sim)?;
    let window = &result.window;
    let frames_dir = out.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    for (k, frame) in window.frames.iter().enumerate() {
        write_frame_png(frame, &frames_dir.join(format!("IM.{}.png", k + 1)))?;
    }
    write_frame_png(&window.reference, &out.join("reference.png"))?;
    write_force_csv(&result.force, &out.join("force.csv"))?;
    write_depth_raw(&result.depth, &out.join("depth_truth.raw"))?;
    let mut imprint = String::from("t,x2\n");
    for (t, x) in window.times.iter().zip(&result.imprint) {
        imprint.push_str(&format!("{t},{x}\n"));
    }
    write_once(&out.join("imprint.csv"), imprint.as_bytes())?;
    if let Some(lut) = lut {
        let last = quantize_frame(&window.frames[window.len() - 1]);
        let decoded = decode_frame(&last, &quantize_frame(&window.reference), &read_lut(lut)?)?;
        write_depth_raw(&decoded.depth, &out.join("depth_decoded.raw"))?;
    }
    let spring = scenario.spring()?;
    let summary = PressSummary {
        scenario,
        object_stiffness: spring.object,
        total_stiffness: spring.total_stiffness(),
        final_imprint: *result.imprint.last().expect("a press has at least two frames"),
        peak_force: result.force.peak(),
        frames: window.len(),
        frame_times: window.times.clone(),
    };
    write_once(&out.join("press.json"), to_json(&summary)?.as_bytes())?;
    Ok(summary)
}

/// Dataset statistics for reports.
pub(crate) fn dataset_metrics(dir: &Path) -> Result<Vec<(String, f64)>> {
    let m = read_manifest(dir)?;
    Ok(vec![
        ("samples".into(), m.samples.len() as f64),
        ("joint_classes".into(), m.classes(LabelKind::Joint) as f64),
        ("lut_fill_fraction".into(), m.lut.fill_fraction),
    ])
}
