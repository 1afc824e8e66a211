use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::{Activation, GaussianPrediction, Mlp, MlpSpec, OptimizerConfig, Predictor};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub encoder_hidden: Vec<usize>,
    pub feature_dim: usize,
    pub predictor_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Final weight of the reversed discriminator gradient.
    pub lambda: f64,
    /// Fraction of the steps over which the reversal weight ramps up linearly.
    pub warmup_fraction: f64,
    /// Epochs for the auxiliary domain and label-bin classifiers.
    pub classifier_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            encoder_hidden: vec![64],
            feature_dim: 16,
            predictor_hidden: vec![64, 64],
            discriminator_hidden: vec![64, 64],
            activation: Activation::Tanh,
            epochs: 100,
            batch_size: 128,
            optimizer: OptimizerConfig::default(),
            lambda: 1.0,
            warmup_fraction: 0.2,
            classifier_epochs: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.epochs == 0 || self.batch_size == 0 || self.feature_dim == 0 || self.classifier_epochs == 0 {
            return Err(Error::Config("epochs, batch sizes and feature_dim must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and nonnegative, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config("warmup_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn encoder_spec(&self) -> MlpSpec {
        MlpSpec::new(1, &self.encoder_hidden, self.feature_dim, self.activation)
    }

    pub fn predictor_spec(&self) -> MlpSpec {
        MlpSpec::new(self.feature_dim, &self.predictor_hidden, 2, self.activation)
    }

    pub fn discriminator_spec(&self) -> MlpSpec {
        MlpSpec::new(self.feature_dim, &self.discriminator_hidden, 1, self.activation)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub seed: u64,
    pub config_digest: String,
}

/// Encoder `E` followed by the Gaussian predictor `F`, whose two outputs are
/// `(mu, log sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPredictor {
    pub encoder: Mlp,
    pub predictor: Mlp,
    pub provenance: Provenance,
}

impl TrainedPredictor {
    pub fn init(cfg: &TrainConfig, provenance: Provenance, rng: &mut StreamRng) -> Result<Self> {
        Ok(Self {
            encoder: Mlp::init(cfg.encoder_spec(), rng)?,
            predictor: Mlp::init(cfg.predictor_spec(), rng)?,
            provenance,
        })
    }

    /// Raw `(mu, log sigma)` rows.
    pub fn raw_outputs(&self, xs: &[f64]) -> Result<Array2<f64>> {
        let x = ArrayView2::from_shape((xs.len(), 1), xs).expect("column");
        let features = self.encoder.forward_batch(x)?;
        self.predictor.forward_batch(features.view())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let raw: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        Ok(Self {
            encoder: Mlp::from_params(raw.encoder.spec, raw.encoder.params)?,
            predictor: Mlp::from_params(raw.predictor.spec, raw.predictor.params)?,
            provenance: raw.provenance,
        })
    }
}

impl Predictor for TrainedPredictor {
    fn predict(&self, x: f64) -> GaussianPrediction {
        self.predict_batch(&[x])[0]
    }

    fn predict_batch(&self, xs: &[f64]) -> Vec<GaussianPrediction> {
        let out = self.raw_outputs(xs).expect("encoder input width is one");
        out.rows()
            .into_iter()
            .map(|r| GaussianPrediction::from_raw(r[0], r[1]))
            .collect()
    }
}
