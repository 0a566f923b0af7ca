//! Model manifests and their checkpoint round trip.
//!
//! The manifest travels as checkpoint metadata and is also written as a
//! standalone JSON file next to the checkpoint.

use std::path::Path;

use serde::{Deserialize, Serialize};
use taxel_nn::{load_checkpoint, save_checkpoint, Error, Result};

use crate::arch;
use crate::model::{TwoStreamConfig, TwoStreamModel};
use crate::regressor::{ForceRegressor, RegressorScaling};

pub const MANIFEST_VERSION: &str = "taxel-model/1";

/// Per-channel affine normalization of the depth input and the force scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub depth_mean: [f64; 3],
    pub depth_std: [f64; 3],
    pub force_scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self { depth_mean: [0.0; 3], depth_std: [1.0; 3], force_scale: crate::FORCE_FULL_SCALE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub version: String,
    pub config: TwoStreamConfig,
    /// Sampling interval of the force window (s).
    pub window_dt: f64,
    /// What the class index denotes (`shape`, `hardness` or `joint`).
    pub label_kind: String,
    pub class_labels: Vec<String>,
    pub normalization: Normalization,
    #[serde(default)]
    pub extra: serde_json::Value,
}

impl ModelManifest {
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Config(format!("unsupported model manifest version {}", self.version)));
        }
        if self.class_labels.len() != self.config.classes {
            return Err(Error::Config(format!(
                "{} class labels for {} classes",
                self.class_labels.len(),
                self.config.classes
            )));
        }
        if self.normalization.depth_std.iter().any(|s| !(*s > 0.0)) || !(self.normalization.force_scale > 0.0) {
            return Err(Error::Config("normalization scales must be positive".into()));
        }
        Ok(())
    }
}

pub fn save_model(path: &Path, model: &TwoStreamModel, manifest: &ModelManifest) -> Result<()> {
    manifest.validate()?;
    if &manifest.config != model.config() {
        return Err(Error::Config("manifest configuration differs from the model".into()));
    }
    let meta = serde_json::to_value(manifest).map_err(|e| Error::Config(e.to_string()))?;
    save_checkpoint(path, &model.networks(), &meta)
}

pub fn load_model(path: &Path) -> Result<(TwoStreamModel, ModelManifest)> {
    let mut ck = load_checkpoint(path)?;
    let manifest: ModelManifest = serde_json::from_value(ck.metadata.clone())
        .map_err(|e| Error::Format { path: path.to_path_buf(), msg: format!("model manifest: {e}") })?;
    manifest.validate()?;
    let networks = [
        ck.take(arch::DEPTH_ENCODER)?,
        ck.take(arch::FORCE_ENCODER)?,
        ck.take(arch::FUSION_GATE)?,
        ck.take(arch::CLASSIFIER)?,
    ];
    Ok((TwoStreamModel::from_networks(manifest.config, networks)?, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegressorMeta {
    version: String,
    scaling: RegressorScaling,
}

pub fn save_regressor(path: &Path, r: &ForceRegressor) -> Result<()> {
    let meta = RegressorMeta { version: MANIFEST_VERSION.into(), scaling: r.scaling() };
    let meta = serde_json::to_value(meta).map_err(|e| Error::Config(e.to_string()))?;
    save_checkpoint(path, &[r.network()], &meta)
}

pub fn load_regressor(path: &Path) -> Result<ForceRegressor> {
    let mut ck = load_checkpoint(path)?;
    let meta: RegressorMeta = serde_json::from_value(ck.metadata.clone())
        .map_err(|e| Error::Format { path: path.to_path_buf(), msg: format!("regressor metadata: {e}") })?;
    ForceRegressor::from_network(ck.take(arch::FORCE_REGRESSOR)?, meta.scaling)
}
