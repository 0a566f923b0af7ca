//! Simulated press experiments for the two-stream tactile classifier.
//!
//! A press is simulated with the series-spring model and the optical sensor
//! renderer, decoded back to depth through a calibrated lookup table, and
//! paired with a force window. Datasets of such presses drive classifier
//! training, evaluation, modality ablation, a hand-feature baseline and the
//! image-to-force regressor.

pub mod ablate;
pub mod baseline;
pub mod calibration;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod regress;
pub mod sample;
pub mod scenario;
pub mod seeding;
pub mod train;

pub use ablate::{ablate, run_modality, Ablation, AblationSummary, ModalityRun};
pub use baseline::{manual_baseline, BaselineConfig, BaselineOutcome};
pub use calibration::{calibrate_sensor, CalibrationConfig};
pub use dataset::{gen_dataset, load_dataset, Dataset, DatasetManifest, GenConfig, GenOptions, LabelKind, Split};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport};
pub use regress::{evaluate_regressor, regression_data, train_regressor, RegressionConfig, RegressionReport};
pub use scenario::{simulate_press, PressScenario, SimConfig, Simulation};
pub use seeding::derive_seed;
pub use train::{train_classifier, History, TrainConfig, Trained};
