//! Synthetic dataset generation and loading.
//!
//! Layout of a dataset directory:
//!
//! ```text
//! manifest.json         schema-versioned: config, seeds, scenarios, labels, splits, normalization
//! lut.bin               lookup table calibrated for this sensor configuration
//! reference.png         non-contact frame
//! samples/s0000/        one directory per press
//!     IM.1.png IM.n.png external frames
//!     force.csv         simulated force record, header `t,F`
//!     depth.raw (+.json)      decoded depth of IM.n
//!     gradients.raw (+.json)  decoded slopes of IM.n
//!     gt.json           scenario, spring constants, hand-crafted features
//! ```
//!
//! Each sample is written to a scratch directory and renamed into place, and
//! the manifest is rewritten (also by rename) after every sample, so an
//! interrupted run leaves a readable manifest listing only finished samples.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use taxel_core::mechanics::ForceSequence;
use taxel_core::optics::io::{
    quantize_frame, read_depth_raw, read_gradient_raw, write_depth_raw, write_frame_png, write_gradient_raw, write_lut,
};
use taxel_core::optics::{DepthMap, GradientField, Placement, ShapeKind};
use taxel_nn::Tensor;
use taxel_twostream::{ForceRegressor, Normalization, FORCE_FULL_SCALE};

use crate::calibration::{calibrate_sensor, CalibrationConfig};
use crate::error::{Error, Result};
use crate::sample::{
    build_sample, depth_input, force_window, hand_features, regressed_forces, Decoded, ForceSource, HandFeatures,
    InputConfig, SampleInputs,
};
use crate::scenario::{simulate_press, PressScenario, SimConfig};
use crate::seeding::derive_seed;

pub const DATASET_VERSION: &str = "taxel-dataset/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LUT_FILE: &str = "lut.bin";
pub const REFERENCE_FILE: &str = "reference.png";

const SPLIT_STREAM: u64 = 0x0053_504c_4954;
const SCENARIO_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.70, val: 0.15, test: 0.15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub sim: SimConfig,
    pub calibration: CalibrationConfig,
    pub inputs: InputConfig,
    pub shapes: Vec<ShapeKind>,
    /// Hardness grades (HA); one class each.
    pub hardness_grades: Vec<f64>,
    /// Press depths (mm).
    pub press_depths: Vec<f64>,
    pub repetitions: usize,
    /// Largest in-plane offset of the indenter from the frame center (mm).
    pub placement_jitter: f64,
    /// Largest indenter rotation (degrees).
    pub rotation_jitter: f64,
    pub split: SplitFractions,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            calibration: CalibrationConfig::default(),
            inputs: InputConfig::default(),
            shapes: ShapeKind::ALL.to_vec(),
            hardness_grades: (1..=8).map(|k| 10.0 * k as f64).collect(),
            press_depths: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            repetitions: 5,
            placement_jitter: 0.25,
            rotation_jitter: 10.0,
            split: SplitFractions::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.calibration.validate()?;
        self.inputs.validate()?;
        if self.shapes.is_empty() || self.hardness_grades.is_empty() || self.press_depths.is_empty() {
            return Err(Error::config("shapes, hardness grades and press depths must be nonempty"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        let mut shapes = self.shapes.clone();
        shapes.sort();
        shapes.dedup();
        if shapes.len() != self.shapes.len() {
            return Err(Error::config("shapes must be distinct"));
        }
        if self.hardness_grades.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("hardness grades must increase strictly"));
        }
        let [lo, hi] = self.sim.hardness_range;
        if self.hardness_grades.iter().any(|&h| h < lo || h > hi) {
            return Err(Error::config(format!("hardness grades must lie in [{lo}, {hi}]")));
        }
        if self.press_depths.iter().any(|&d| !(d > 0.0 && d <= self.sim.max_indentation)) {
            return Err(Error::config("press depths must lie in (0, max_indentation]"));
        }
        if !(self.placement_jitter >= 0.0 && self.rotation_jitter >= 0.0) {
            return Err(Error::config("jitter must be nonnegative"));
        }
        let SplitFractions { train, val, test } = self.split;
        if [train, val, test].iter().any(|f| !(*f >= 0.0)) || ((train + val + test) - 1.0).abs() > 1e-9 {
            return Err(Error::config("split fractions must be nonnegative and sum to 1"));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        self.shapes.len() * self.hardness_grades.len() * self.press_depths.len() * self.repetitions
    }

    pub fn joint_classes(&self) -> usize {
        self.shapes.len() * self.hardness_grades.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Which label a classifier predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    Shape,
    Hardness,
    #[default]
    Joint,
}

impl LabelKind {
    pub const ALL: [LabelKind; 3] = [LabelKind::Shape, LabelKind::Hardness, LabelKind::Joint];

    pub fn name(self) -> &'static str {
        match self {
            LabelKind::Shape => "shape",
            LabelKind::Hardness => "hardness",
            LabelKind::Joint => "joint",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labels {
    pub shape: usize,
    pub hardness: usize,
    /// `shape * hardness_classes + hardness`.
    pub joint: usize,
}

impl Labels {
    pub fn get(&self, kind: LabelKind) -> usize {
        match kind {
            LabelKind::Shape => self.shape,
            LabelKind::Hardness => self.hardness,
            LabelKind::Joint => self.joint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub id: String,
    pub scenario: PressScenario,
    pub labels: Labels,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForceStream {
    /// The simulated force record.
    #[default]
    Oracle,
    /// Force regressed from the frames (`force_regressed.csv`).
    Regressed,
}

impl ForceStream {
    fn file(self) -> &'static str {
        match self {
            ForceStream::Oracle => "force.csv",
            ForceStream::Regressed => "force_regressed.csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LutRecord {
    pub file: String,
    pub filled_cells: usize,
    pub fill_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: String,
    pub master_seed: u64,
    pub config: GenConfig,
    pub force_stream: ForceStream,
    pub shape_labels: Vec<String>,
    pub hardness_labels: Vec<String>,
    pub lut: LutRecord,
    pub expected_samples: usize,
    /// False while generation is running or after it failed.
    pub complete: bool,
    pub samples: Vec<SampleRecord>,
    /// Per-channel depth statistics over the train split; set on completion.
    pub normalization: Option<Normalization>,
}

impl DatasetManifest {
    pub fn class_labels(&self, kind: LabelKind) -> Vec<String> {
        match kind {
            LabelKind::Shape => self.shape_labels.clone(),
            LabelKind::Hardness => self.hardness_labels.clone(),
            LabelKind::Joint => self
                .shape_labels
                .iter()
                .flat_map(|s| self.hardness_labels.iter().map(move |h| format!("{s}/{h}")))
                .collect(),
        }
    }

    pub fn classes(&self, kind: LabelKind) -> usize {
        match kind {
            LabelKind::Shape => self.shape_labels.len(),
            LabelKind::Hardness => self.hardness_labels.len(),
            LabelKind::Joint => self.shape_labels.len() * self.hardness_labels.len(),
        }
    }
}

/// Ground truth and derived quantities stored per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub scenario: PressScenario,
    /// `k1` (N/mm).
    pub object_stiffness: f64,
    /// `k_total` (N/mm).
    pub total_stiffness: f64,
    /// Elastomer imprint depth at `IM.n` (mm).
    pub final_imprint: f64,
    pub peak_force: f64,
    pub frame_times: Vec<f64>,
    pub features: HandFeatures,
}

/// Press scenarios of the full grid in generation order, with split assignment.
pub fn plan_samples(cfg: &GenConfig, master_seed: u64) -> Vec<SampleRecord> {
    let hardness_classes = cfg.hardness_grades.len();
    let mut records = Vec::with_capacity(cfg.sample_count());
    for (si, &shape) in cfg.shapes.iter().enumerate() {
        for (hi, &hardness) in cfg.hardness_grades.iter().enumerate() {
            for &depth in &cfg.press_depths {
                for _ in 0..cfg.repetitions {
                    let index = records.len();
                    let seed = derive_seed(master_seed, SCENARIO_STREAM_BASE + index as u64);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut jitter = |span: f64| if span > 0.0 { rng.random_range(-span..=span) } else { 0.0 };
                    let placement = Placement {
                        dx: jitter(cfg.placement_jitter),
                        dy: jitter(cfg.placement_jitter),
                        rotation: jitter(cfg.rotation_jitter).to_radians(),
                    };
                    let scenario = cfg.sim.scenario(shape, hardness, depth).with_placement(placement).with_seed(seed);
                    records.push(SampleRecord {
                        id: format!("s{index:04}"),
                        scenario,
                        labels: Labels { shape: si, hardness: hi, joint: si * hardness_classes + hi },
                        split: Split::Train,
                    });
                }
            }
        }
    }
    let joint: Vec<usize> = records.iter().map(|r| r.labels.joint).collect();
    let splits = assign_splits(&joint, cfg.joint_classes(), cfg.split, master_seed);
    for (r, s) in records.iter_mut().zip(splits) {
        r.split = s;
    }
    records
}

/// Stratified split: per-class counts of each split differ by at most one
/// across classes, and split totals are the rounded fractions of the whole.
pub fn assign_splits(labels: &[usize], classes: usize, fractions: SplitFractions, seed: u64) -> Vec<Split> {
    let n = labels.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM));
    for m in members.iter_mut() {
        m.shuffle(&mut rng);
    }
    let quota = |f: f64| -> Vec<usize> { members.iter().map(|m| (m.len() as f64 * f).floor() as usize).collect() };
    let mut val = quota(fractions.val);
    let mut test = quota(fractions.test);
    let extra_val = ((n as f64 * fractions.val).round() as usize).saturating_sub(val.iter().sum());
    let extra_test = ((n as f64 * fractions.test).round() as usize).saturating_sub(test.iter().sum());
    // test extras continue where val extras stop so no class gets both
    for k in 0..extra_val {
        val[k % classes] += 1;
    }
    for k in extra_val..extra_val + extra_test {
        test[k % classes] += 1;
    }
    let mut out = vec![Split::Train; n];
    for (c, m) in members.iter().enumerate() {
        let v = val[c].min(m.len());
        let t = test[c].min(m.len() - v);
        for &i in &m[..v] {
            out[i] = Split::Val;
        }
        for &i in &m[v..v + t] {
            out[i] = Split::Test;
        }
    }
    out
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    write_atomic(path, (text + "\n").as_bytes())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_force_csv(seq: &ForceSequence, path: &Path) -> Result<()> {
    let mut out = String::from("t,F\n");
    for (t, f) in seq.samples() {
        out.push_str(&format!("{t},{f}\n"));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_force_csv(path: &Path) -> Result<ForceSequence> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("t,F") {
        return Err(Error::format(path, "expected header `t,F`"));
    }
    let mut times = Vec::new();
    let mut forces = Vec::new();
    for (k, line) in lines.enumerate() {
        let parsed = line.split_once(',').and_then(|(t, f)| Some((t.parse::<f64>().ok()?, f.parse::<f64>().ok()?)));
        let (t, f) = parsed.ok_or_else(|| Error::format(path, format!("line {}: expected `t,F`", k + 2)))?;
        times.push(t);
        forces.push(f);
    }
    if times.len() < 2 {
        return Err(Error::format(path, "fewer than two samples"));
    }
    let dt = times[1] - times[0];
    if times.iter().enumerate().any(|(i, &t)| (t - i as f64 * dt).abs() > 1e-9 * (1.0 + t.abs())) {
        return Err(Error::format(path, "samples are not uniformly spaced from t = 0"));
    }
    Ok(ForceSequence::new(dt, forces)?)
}

/// Values as stored on disk (little-endian `f32`).
fn f32_rounded(d: &Decoded) -> Decoded {
    let round = |g: &taxel_core::Grid| g.map(|v| v as f32 as f64);
    Decoded {
        depth: DepthMap { depth: round(&d.depth.depth), pitch: d.depth.pitch },
        gradients: GradientField {
            gx: round(&d.gradients.gx),
            gy: round(&d.gradients.gy),
            mask: d.gradients.mask.clone(),
            pitch: d.gradients.pitch,
        },
    }
}

/// One in-memory sample: record, unnormalized inputs, hand-crafted features.
#[derive(Debug, Clone)]
pub struct Sample {
    pub record: SampleRecord,
    pub inputs: SampleInputs,
    pub features: HandFeatures,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.record.split == split).collect()
    }

    pub fn normalization(&self) -> Result<Normalization> {
        self.manifest.normalization.ok_or_else(|| Error::config("dataset has no normalization statistics"))
    }
}

/// Per-channel mean and standard deviation of depth inputs.
pub fn depth_statistics<'a>(inputs: impl IntoIterator<Item = &'a Tensor>) -> Result<Normalization> {
    let mut sum = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    let mut count = 0usize;
    for t in inputs {
        let plane = t.len() / 3;
        for c in 0..3 {
            for v in &t.data()[c * plane..(c + 1) * plane] {
                sum[c] += v;
                sq[c] += v * v;
            }
        }
        count += plane;
    }
    if count == 0 {
        return Err(Error::config("no training samples to compute statistics from"));
    }
    let n = count as f64;
    let mean = sum.map(|s| s / n);
    let mut std = [0.0; 3];
    for c in 0..3 {
        std[c] = (sq[c] / n - mean[c] * mean[c]).max(0.0).sqrt().max(1e-6);
    }
    Ok(Normalization { depth_mean: mean, depth_std: std, force_scale: FORCE_FULL_SCALE })
}

fn prepare_out_dir(out: &Path) -> Result<()> {
    if out.exists() {
        let mut entries = fs::read_dir(out).map_err(|e| Error::io(out, e))?;
        if entries.next().is_some() {
            return Err(Error::config(format!("output directory {} is not empty", out.display())));
        }
    }
    fs::create_dir_all(out.join("samples")).map_err(|e| Error::io(out, e))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GenOptions<'a> {
    /// Worker threads; 0 or 1 generates serially.
    pub jobs: usize,
    /// When set, the force stream is regressed from the frames.
    pub regressor: Option<&'a ForceRegressor>,
}

struct Produced {
    record: SampleRecord,
    depth_input: Tensor,
}

fn produce(
    root: &Path,
    record: &SampleRecord,
    cfg: &GenConfig,
    lut: &taxel_core::optics::CalibrationLUT,
    opts: &GenOptions<'_>,
) -> Result<Produced> {
    let sim = simulate_press(&record.scenario, &cfg.sim)?;
    let mut window = sim.window;
    // decode exactly what is stored: 8-bit frames
    window.frames.iter_mut().for_each(|f| *f = quantize_frame(f));
    window.reference = quantize_frame(&window.reference);
    let source = opts.regressor.map_or(ForceSource::Oracle, ForceSource::Regressed);
    let (_, decoded) = build_sample(&window, &sim.force, lut, &window.reference, source, &cfg.inputs)?;
    let decoded = f32_rounded(&decoded);
    let features = hand_features(&decoded.depth, &sim.force, &record.scenario)?;
    let spring = record.scenario.spring()?;

    let dir = root.join("samples").join(&record.id);
    let tmp = root.join("samples").join(format!(".tmp-{}", record.id));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    write_frame_png(&window.frames[0], &tmp.join("IM.1.png"))?;
    write_frame_png(&window.frames[window.len() - 1], &tmp.join("IM.n.png"))?;
    write_force_csv(&sim.force, &tmp.join("force.csv"))?;
    if let Some(r) = opts.regressor {
        write_force_csv(&regressed_forces(&window, r, cfg.inputs.downsample)?, &tmp.join("force_regressed.csv"))?;
    }
    write_depth_raw(&decoded.depth, &tmp.join("depth.raw"))?;
    write_gradient_raw(&decoded.gradients, &tmp.join("gradients.raw"))?;
    let gt = GroundTruth {
        scenario: record.scenario,
        object_stiffness: spring.object,
        total_stiffness: spring.total_stiffness(),
        final_imprint: *sim.imprint.last().expect("nonempty window"),
        peak_force: sim.force.peak(),
        frame_times: window.times.clone(),
        features,
    };
    write_json(&tmp.join("gt.json"), &gt)?;
    fs::rename(&tmp, &dir).map_err(|e| Error::io(&dir, e))?;
    Ok(Produced {
        record: record.clone(),
        depth_input: depth_input(&decoded.depth, &decoded.gradients, cfg.inputs.downsample)?,
    })
}

/// Generates the dataset grid into `out` (which must be absent or empty).
pub fn gen_dataset(cfg: &GenConfig, master_seed: u64, out: &Path, opts: GenOptions<'_>) -> Result<DatasetManifest> {
    cfg.validate()?;
    prepare_out_dir(out)?;
    let (lut, reference) = calibrate_sensor(&cfg.sim, &cfg.calibration)?;
    write_lut(&lut, &out.join(LUT_FILE))?;
    write_frame_png(&reference, &out.join(REFERENCE_FILE))?;

    let plan = plan_samples(cfg, master_seed);
    let mut manifest = DatasetManifest {
        version: DATASET_VERSION.into(),
        master_seed,
        config: cfg.clone(),
        force_stream: if opts.regressor.is_some() { ForceStream::Regressed } else { ForceStream::Oracle },
        shape_labels: cfg.shapes.iter().map(|s| s.name().to_string()).collect(),
        hardness_labels: cfg.hardness_grades.iter().map(|h| format!("{h}HA")).collect(),
        lut: LutRecord { file: LUT_FILE.into(), filled_cells: lut.filled_cells(), fill_fraction: lut.fill_fraction() },
        expected_samples: plan.len(),
        complete: false,
        samples: Vec::with_capacity(plan.len()),
        normalization: None,
    };
    let manifest_path = out.join(MANIFEST_FILE);
    write_json(&manifest_path, &manifest)?;

    let jobs = opts.jobs.max(1);
    let mut train_inputs = Vec::new();
    for chunk in plan.chunks(jobs) {
        let results: Vec<Result<Produced>> = if jobs == 1 {
            chunk.iter().map(|r| produce(out, r, cfg, &lut, &opts)).collect()
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunk.iter().map(|r| scope.spawn(|| produce(out, r, cfg, &lut, &opts))).collect();
                handles.into_iter().map(|h| h.join().expect("sample worker panicked")).collect()
            })
        };
        for (record, result) in chunk.iter().zip(results) {
            let produced = result.map_err(|e| e.in_sample(&record.id))?;
            if produced.record.split == Split::Train {
                train_inputs.push(produced.depth_input);
            }
            manifest.samples.push(produced.record);
            write_json(&manifest_path, &manifest)?;
        }
        log::debug!("generated {}/{} samples", manifest.samples.len(), manifest.expected_samples);
    }
    manifest.normalization = Some(depth_statistics(&train_inputs)?);
    manifest.complete = true;
    write_json(&manifest_path, &manifest)?;
    log::info!("dataset of {} samples written to {}", manifest.samples.len(), out.display());
    Ok(manifest)
}

pub fn read_manifest(root: &Path) -> Result<DatasetManifest> {
    let path = root.join(MANIFEST_FILE);
    let manifest: DatasetManifest = read_json(&path)?;
    if manifest.version != DATASET_VERSION {
        return Err(Error::format(&path, format!("unsupported dataset version {}", manifest.version)));
    }
    Ok(manifest)
}

/// Reads a completed dataset, rebuilding every sample's inputs from its files.
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let manifest = read_manifest(root)?;
    if !manifest.complete {
        return Err(Error::config(format!(
            "dataset {} is incomplete ({} of {} samples)",
            root.display(),
            manifest.samples.len(),
            manifest.expected_samples
        )));
    }
    let inputs = manifest.config.inputs;
    let samples = manifest
        .samples
        .iter()
        .map(|record| {
            let dir = root.join("samples").join(&record.id);
            let load = || -> Result<Sample> {
                let depth = read_depth_raw(&dir.join("depth.raw"))?;
                let gradients = read_gradient_raw(&dir.join("gradients.raw"))?;
                let force = read_force_csv(&dir.join(manifest.force_stream.file()))?;
                let gt: GroundTruth = read_json(&dir.join("gt.json"))?;
                Ok(Sample {
                    record: record.clone(),
                    inputs: SampleInputs {
                        depth: depth_input(&depth, &gradients, inputs.downsample)?,
                        force: force_window(&force, inputs.window, inputs.window_dt),
                    },
                    features: gt.features,
                })
            };
            load().map_err(|e| e.in_sample(&record.id))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { root: root.to_path_buf(), manifest, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_balanced() {
        let cfg = GenConfig::default();
        let plan = plan_samples(&cfg, 7);
        assert_eq!(plan.len(), 800);
        let mut per_class = [0; 32];
        for r in &plan {
            per_class[r.labels.joint] += 1;
        }
        assert!(per_class.iter().all(|&c| c == 25));
    }

    #[test]
    fn default_split_is_seventy_fifteen_fifteen() {
        let plan = plan_samples(&GenConfig::default(), 7);
        let count = |s| plan.iter().filter(|r| r.split == s).count();
        assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (560, 120, 120));
        for split in [Split::Train, Split::Val, Split::Test] {
            let mut per_class = vec![0i64; 32];
            for r in plan.iter().filter(|r| r.split == split) {
                per_class[r.labels.joint] += 1;
            }
            let (lo, hi) = (per_class.iter().min().unwrap(), per_class.iter().max().unwrap());
            assert!(hi - lo <= 1, "{split:?}: {lo}..{hi}");
        }
    }

    #[test]
    fn plan_depends_only_on_seed() {
        let cfg = GenConfig::default();
        assert_eq!(plan_samples(&cfg, 3), plan_samples(&cfg, 3));
        assert_ne!(plan_samples(&cfg, 3), plan_samples(&cfg, 4));
    }

    #[test]
    fn jitter_stays_in_bounds() {
        let cfg = GenConfig::default();
        for r in plan_samples(&cfg, 11) {
            let p = r.scenario.placement;
            assert!(p.dx.abs() <= 0.25 && p.dy.abs() <= 0.25);
            assert!(p.rotation.abs() <= 10f64.to_radians() + 1e-12);
        }
    }

    #[test]
    fn force_csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let seq = ForceSequence::new(0.05, (0..41).map(|i| (i as f64 * 0.37).sin().abs() * 3.1).collect()).unwrap();
        let path = dir.path().join("force.csv");
        write_force_csv(&seq, &path).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with("t,F\n0,"));
        let back = read_force_csv(&path).unwrap();
        assert_eq!(back.forces(), seq.forces());
        assert!((back.dt() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn malformed_force_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("force.csv");
        fs::write(&path, "time,force\n0,0\n").unwrap();
        assert!(read_force_csv(&path).unwrap_err().is_usage());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let cfg = GenConfig { hardness_grades: vec![20.0, 10.0], ..GenConfig::default() };
        assert!(cfg.validate().is_err());
        let mut cfg = GenConfig::default();
        cfg.split.test = 0.5;
        assert!(cfg.validate().is_err());
        let err = serde_json::from_str::<GenConfig>(r#"{"repetitions": 2, "colour": 1}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }
}
