use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use taxel_core::optics::ShapeKind;
use taxel_pipeline::{LabelKind, Split};
use taxel_twostream::Modality;

#[derive(Debug, Parser)]
#[command(
    name = "taxel",
    version,
    about = "Simulated visuo-tactile sensing: data, calibration, training and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command that takes a configuration.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// JSON configuration; unknown keys are rejected. A `config.resolved.json`
    /// from an earlier run is accepted as well and replays that run.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    /// Master seed; every random stream of the run derives from it.
    /// Defaults to the seed of a replayed config, else 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset of simulated presses.
    GenData {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        seed: SeedArgs,
        /// Output directory; must be absent or empty.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for sample generation (outputs do not depend on it).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Force regressor checkpoint; when given, the force stream is regressed from the frames.
        #[arg(long)]
        regressor: Option<PathBuf>,
    },
    /// Calibrate the sensor lookup table and sweep reconstruction accuracy on a sphere.
    Calibrate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a depth map from one frame against its reference.
    Reconstruct {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long = "ref", value_name = "REF")]
        reference: PathBuf,
        #[arg(long)]
        lut: PathBuf,
        /// Depth file to write (`.raw` plus a JSON sidecar).
        #[arg(long)]
        out: PathBuf,
        /// Pixel pitch of the frames (mm).
        #[arg(long, default_value_t = 0.08)]
        pitch: f64,
    },
    /// Simulate one press and dump frames, force record and ground truth.
    Press {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long, value_enum)]
        shape: ShapeArg,
        /// Shore A hardness (HA).
        #[arg(long)]
        hardness: f64,
        /// Total press depth (mm).
        #[arg(long)]
        depth: f64,
        /// In-plane offset from the frame center (mm).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        dx: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        dy: f64,
        /// Indenter rotation (degrees).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        rotation: f64,
        /// Also decode the last frame with this lookup table.
        #[arg(long)]
        lut: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the two-stream classifier, or the frame-to-force regressor.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long, value_enum, default_value_t = TaskArg::Classifier)]
        task: TaskArg,
        /// Dataset directory (classifier only).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Overrides the configured modality.
        #[arg(long, value_enum)]
        modality: Option<ModalityArg>,
        /// Overrides the configured label kind.
        #[arg(long, value_enum)]
        labels: Option<LabelArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a classifier checkpoint on one dataset split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Labels to score; defaults to the model's own. A joint model is
        /// marginalized for shape or hardness.
        #[arg(long, value_enum)]
        labels: Option<LabelArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train fused, geometry-only and force-only models under one budget and compare them.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        labels: Option<LabelArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate the hand-crafted-feature baseline.
    Baseline {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collate metrics of finished runs into CSV and JSON tables.
    Report {
        /// Output directories of earlier runs.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Circle,
    Square,
    Triangle,
    TShape,
}

impl From<ShapeArg> for ShapeKind {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Circle => ShapeKind::Circle,
            ShapeArg::Square => ShapeKind::Square,
            ShapeArg::Triangle => ShapeKind::Triangle,
            ShapeArg::TShape => ShapeKind::TShape,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Classifier,
    Regressor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModalityArg {
    Fused,
    GeometryOnly,
    ForceOnly,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Fused => Modality::Fused,
            ModalityArg::GeometryOnly => Modality::GeometryOnly,
            ModalityArg::ForceOnly => Modality::ForceOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelArg {
    Shape,
    Hardness,
    Joint,
}

impl From<LabelArg> for LabelKind {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Shape => LabelKind::Shape,
            LabelArg::Hardness => LabelKind::Hardness,
            LabelArg::Joint => LabelKind::Joint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}
