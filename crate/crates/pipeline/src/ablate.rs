//! Fusion against single-modality ablations under one training budget.

use serde::{Deserialize, Serialize};
use taxel_twostream::Modality;

use crate::dataset::{Dataset, LabelKind, Split};
use crate::error::Result;
use crate::eval::{evaluate, EvalReport};
use crate::train::{train_classifier, TrainConfig, Trained};

#[derive(Debug, Clone)]
pub struct ModalityRun {
    pub modality: Modality,
    pub trained: Trained,
    pub report: EvalReport,
}

/// Trains with `cfg` restricted to `modality` and evaluates on the test split.
pub fn run_modality(ds: &Dataset, cfg: &TrainConfig, seed: u64, modality: Modality) -> Result<ModalityRun> {
    let cfg = TrainConfig { modality, ..*cfg };
    let trained = train_classifier(ds, &cfg, seed, None)?;
    let report = evaluate(&trained.model, &trained.manifest, ds, Split::Test, cfg.label_kind)?;
    log::info!("{}: test accuracy {:.3}", modality.name(), report.accuracy);
    Ok(ModalityRun { modality, trained, report })
}

#[derive(Debug, Clone)]
pub struct Ablation {
    pub fused: ModalityRun,
    pub geometry_only: ModalityRun,
    pub force_only: ModalityRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub label_kind: LabelKind,
    pub fused_accuracy: f64,
    pub geometry_only_accuracy: f64,
    pub force_only_accuracy: f64,
    /// Fused accuracy minus the better single modality, in percentage points.
    pub margin_pp: f64,
    pub fused_dominates: bool,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Ablation {
    pub fn runs(&self) -> [&ModalityRun; 3] {
        [&self.fused, &self.geometry_only, &self.force_only]
    }

    pub fn summary(&self, train: &TrainConfig, seed: u64) -> AblationSummary {
        let (f, g, h) =
            (self.fused.report.accuracy, self.geometry_only.report.accuracy, self.force_only.report.accuracy);
        AblationSummary {
            label_kind: self.fused.report.label_kind,
            fused_accuracy: f,
            geometry_only_accuracy: g,
            force_only_accuracy: h,
            margin_pp: 100.0 * (f - g.max(h)),
            fused_dominates: f >= g && f >= h,
            train: TrainConfig { modality: Modality::Fused, ..*train },
            seed,
        }
    }
}

/// Fused, geometry-only and force-only models, identical except for the modality.
pub fn ablate(ds: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<Ablation> {
    Ok(Ablation {
        fused: run_modality(ds, cfg, seed, Modality::Fused)?,
        geometry_only: run_modality(ds, cfg, seed, Modality::GeometryOnly)?,
        force_only: run_modality(ds, cfg, seed, Modality::ForceOnly)?,
    })
}
