use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::baselines::{bbsc_weights, ssbc_weights, BinImportance};
use super::predictor::{TrainConfig, TrainedPredictor};
use super::train::{train_adversarial, train_plain, train_weighted};
use crate::error::{Error, Result};
use crate::importance::{fit_supervised, fit_unsupervised, fit_unsupervised_with, sample_weights, FittedFactors, ImportanceConfig};
use crate::toy::{Dataset, GroundTruthFactors};

/// Where the joint-importance weights for the weighted adversarial method come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceSource {
    /// Unsupervised fit; target labels are never read.
    #[default]
    Unsupervised,
    /// Supervised fit using target labels.
    Supervised,
    /// Exact factors of the benchmark.
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    SourceOnly,
    TargetOnly,
    Ssbc,
    Bbsc,
    Dann,
    Iwdan,
    Jiada,
}

impl MethodTag {
    pub const ALL: [MethodTag; 7] = [
        Self::SourceOnly,
        Self::TargetOnly,
        Self::Ssbc,
        Self::Bbsc,
        Self::Dann,
        Self::Iwdan,
        Self::Jiada,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SourceOnly => "source_only",
            Self::TargetOnly => "target_only",
            Self::Ssbc => "ssbc",
            Self::Bbsc => "bbsc",
            Self::Dann => "dann",
            Self::Iwdan => "iwdan",
            Self::Jiada => "jiada",
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// A training recipe together with exactly the settings it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum AdaptationMethod {
    SourceOnly,
    TargetOnly,
    Ssbc,
    Bbsc { bins: usize },
    Dann { lambda: f64 },
    Iwdan { bins: usize, lambda: f64 },
    Jiada { lambda: f64, importance: ImportanceSource },
}

impl AdaptationMethod {
    pub fn tag(&self) -> MethodTag {
        match self {
            Self::SourceOnly => MethodTag::SourceOnly,
            Self::TargetOnly => MethodTag::TargetOnly,
            Self::Ssbc => MethodTag::Ssbc,
            Self::Bbsc { .. } => MethodTag::Bbsc,
            Self::Dann { .. } => MethodTag::Dann,
            Self::Iwdan { .. } => MethodTag::Iwdan,
            Self::Jiada { .. } => MethodTag::Jiada,
        }
    }

    /// The method with default settings: two label bins, unit reversal weight,
    /// unsupervised importance.
    pub fn default_for(tag: MethodTag) -> Self {
        match tag {
            MethodTag::SourceOnly => Self::SourceOnly,
            MethodTag::TargetOnly => Self::TargetOnly,
            MethodTag::Ssbc => Self::Ssbc,
            MethodTag::Bbsc => Self::Bbsc { bins: 2 },
            MethodTag::Dann => Self::Dann { lambda: 1.0 },
            MethodTag::Iwdan => Self::Iwdan { bins: 2, lambda: 1.0 },
            MethodTag::Jiada => Self::Jiada {
                lambda: 1.0,
                importance: ImportanceSource::Unsupervised,
            },
        }
    }

    /// Report label; distinguishes JIADA variants by their weight source.
    pub fn label(&self) -> String {
        match self {
            Self::Jiada {
                importance: ImportanceSource::Supervised,
                ..
            } => "jiada_sup".into(),
            Self::Jiada {
                importance: ImportanceSource::GroundTruth,
                ..
            } => "jiada_gt".into(),
            other => other.tag().as_str().into(),
        }
    }

    /// Whether training includes a discriminator.
    pub fn is_adversarial(&self) -> bool {
        match *self {
            Self::Dann { lambda } | Self::Iwdan { lambda, .. } | Self::Jiada { lambda, .. } => lambda > 0.0,
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Bbsc { bins } | Self::Iwdan { bins, .. } if bins < 2 => {
                Err(Error::Config(format!("{} needs at least 2 label bins", self.tag())))
            }
            Self::Dann { lambda } | Self::Iwdan { lambda, .. } | Self::Jiada { lambda, .. }
                if !(lambda >= 0.0 && lambda.is_finite()) =>
            {
                Err(Error::Config(format!("{} needs a finite nonnegative lambda", self.tag())))
            }
            _ => Ok(()),
        }
    }
}

/// Everything a training cell may draw on. Only `TargetOnly` and the
/// supervised importance source read target labels.
pub struct MethodInputs<'a> {
    pub source: &'a Dataset,
    pub target: &'a Dataset,
    pub train: &'a TrainConfig,
    pub importance: &'a ImportanceConfig,
    /// Needed by the ground-truth importance source.
    pub ground_truth: Option<&'a GroundTruthFactors>,
    /// A trained source-only model reused as the source conditional; trained on demand if absent.
    pub conditional: Option<&'a TrainedPredictor>,
}

#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub model: TrainedPredictor,
    /// Per-source-sample weights used in training, if any.
    pub weights: Option<Vec<f64>>,
    pub factors: Option<FittedFactors>,
    pub bins: Option<BinImportance>,
}

impl MethodOutcome {
    fn plain(model: TrainedPredictor) -> Self {
        Self {
            model,
            weights: None,
            factors: None,
            bins: None,
        }
    }
}

pub fn train_method(
    method: &AdaptationMethod,
    inputs: &MethodInputs<'_>,
    seed: u64,
    metrics: Option<&mut dyn Write>,
) -> Result<MethodOutcome> {
    method.validate()?;
    let label = method.label();
    let MethodInputs {
        source,
        target,
        train,
        importance,
        ..
    } = *inputs;
    match *method {
        AdaptationMethod::SourceOnly => Ok(MethodOutcome::plain(train_plain(source, train, seed)?)),
        AdaptationMethod::TargetOnly => Ok(MethodOutcome::plain(train_plain(target, train, seed)?)),
        AdaptationMethod::Ssbc => {
            let w = ssbc_weights(source, target, train, seed)?;
            let model = train_weighted(source, Some(&w), train, seed, &label)?;
            Ok(MethodOutcome {
                weights: Some(w),
                ..MethodOutcome::plain(model)
            })
        }
        AdaptationMethod::Bbsc { bins } => {
            let (w, sol) = bbsc_weights(source, target, bins, train, seed)?;
            let model = train_weighted(source, Some(&w), train, seed, &label)?;
            Ok(MethodOutcome {
                weights: Some(w),
                bins: Some(sol),
                ..MethodOutcome::plain(model)
            })
        }
        AdaptationMethod::Dann { lambda } => {
            let w = vec![1.0; source.len()];
            let model = train_adversarial(source, target, &w, lambda, train, seed, &label, metrics)?;
            Ok(MethodOutcome::plain(model))
        }
        AdaptationMethod::Iwdan { bins, lambda } => {
            let (w, sol) = bbsc_weights(source, target, bins, train, seed)?;
            let model = train_adversarial(source, target, &w, lambda, train, seed, &label, metrics)?;
            Ok(MethodOutcome {
                weights: Some(w),
                bins: Some(sol),
                ..MethodOutcome::plain(model)
            })
        }
        AdaptationMethod::Jiada {
            lambda,
            importance: src,
        } => {
            let (w, factors) = match src {
                ImportanceSource::GroundTruth => {
                    let gt = inputs
                        .ground_truth
                        .ok_or_else(|| Error::Config("ground-truth importance requested without ground truth".into()))?;
                    let w = source.samples.iter().map(|s| gt.w(s.x, s.y)).collect();
                    (w, None)
                }
                ImportanceSource::Supervised => {
                    let f = fit_supervised(source, target, importance, seed)?;
                    (sample_weights(&f.u, &f.v, source, importance.clip)?, Some(f))
                }
                ImportanceSource::Unsupervised => {
                    let f = match inputs.conditional {
                        Some(c) => fit_unsupervised_with(source, target, c, importance, seed)?,
                        None => fit_unsupervised(source, target, importance, train, seed)?,
                    };
                    (sample_weights(&f.u, &f.v, source, importance.clip)?, Some(f))
                }
            };
            let model = train_adversarial(source, target, &w, lambda, train, seed, &label, metrics)?;
            Ok(MethodOutcome {
                model,
                weights: Some(w),
                factors,
                bins: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for t in MethodTag::ALL {
            assert_eq!(t.as_str().parse::<MethodTag>().unwrap(), t);
            assert_eq!(AdaptationMethod::default_for(t).tag(), t);
        }
        assert!("cida".parse::<MethodTag>().is_err());
    }

    #[test]
    fn settings_serialise_with_the_tag() {
        let m = AdaptationMethod::Iwdan { bins: 3, lambda: 0.5 };
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"method":"iwdan","bins":3,"lambda":0.5}"#);
        assert_eq!(serde_json::from_str::<AdaptationMethod>(&json).unwrap(), m);
        assert!(serde_json::from_str::<AdaptationMethod>(r#"{"method":"bbsc"}"#).is_err());
    }

    #[test]
    fn invalid_settings_are_rejected() {
        assert!(AdaptationMethod::Bbsc { bins: 1 }.validate().is_err());
        assert!(AdaptationMethod::Dann { lambda: -1.0 }.validate().is_err());
        assert!(AdaptationMethod::Dann { lambda: 0.0 }.validate().is_ok());
    }
}
