//! Training pipelines that turn source data, unlabeled target inputs and an
//! optional per-sample weighting into a Gaussian predictor for the target.
//!
//! All methods share one encoder/predictor architecture. Reweighting
//! baselines train without a discriminator; adversarial methods add a domain
//! discriminator on the encoder features with a reversed gradient.

mod baselines;
mod method;
mod predictor;
mod train;

pub use baselines::{bbsc_solve, bbsc_weights, nnls, ssbc_weights, BinImportance, WEIGHT_CLIP};
pub use method::{train_method, AdaptationMethod, ImportanceSource, MethodInputs, MethodOutcome, MethodTag};
pub use predictor::{Provenance, TrainConfig, TrainedPredictor};
pub use train::{lambda_schedule, train_adversarial, train_plain, train_weighted, StepMetrics};
