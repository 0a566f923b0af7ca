//! Two-stream tactile classifier.
//!
//! A depth stream (`[3, H, W]`: normalized depth plus both slopes) and a
//! force stream (`[1, T]`: force window over the full scale) are each encoded
//! to 128 features. A sigmoid gate mixes them as `w ⊙ g + (1 - w) ⊙ f`, and a
//! two-layer head classifies the result. [`ForceRegressor`] estimates contact
//! force from a single frame difference and can feed the force stream.

pub mod arch;
mod fusion;
mod manifest;
mod model;
mod regressor;

pub use arch::FEATURE_DIM;
pub use fusion::{attention_fuse, combine, GateOverride, Modality};
pub use manifest::{
    load_model, load_regressor, save_model, save_regressor, ModelManifest, Normalization, MANIFEST_VERSION,
};
pub use model::{Forward, ModelGrads, ModelTape, TwoStreamConfig, TwoStreamModel, TwoStreamOptimizer};
pub use regressor::{ForceRegressor, RegressorScaling, FORCE_FULL_SCALE};
pub use taxel_nn::{Error, Result};

/// Class probabilities from a joint feature through the classifier head.
pub fn classify(head: &taxel_nn::Network, joint: &taxel_nn::Tensor) -> Result<Vec<f64>> {
    Ok(taxel_nn::softmax(head.infer(joint)?.data()))
}
