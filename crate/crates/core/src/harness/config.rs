use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptation::{AdaptationMethod, MethodTag, TrainConfig};
use crate::digest::json_digest;
use crate::error::{Error, Result};
use crate::importance::ImportanceConfig;
use crate::toy::{HexagonSpec, SourceSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub hexagon: HexagonSpec,
    pub source_counts: SourceSpec,
    /// Unlabeled target inputs available for adaptation.
    pub n_target: usize,
    /// Fresh labeled target points drawn per seed for evaluation.
    pub n_eval: usize,
    /// Evaluate on the adaptation target sample instead of a fresh one.
    pub eval_on_train: bool,
    pub methods: Vec<AdaptationMethod>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub importance: ImportanceConfig,
    /// Sub-domain counts for which importance grids are fitted on the first seed.
    pub importance_ks: Vec<usize>,
    /// Output directory; not part of the digest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hexagon: HexagonSpec::default(),
            source_counts: SourceSpec::default(),
            n_target: 3000,
            n_eval: 10_000,
            eval_on_train: false,
            methods: MethodTag::ALL.into_iter().map(AdaptationMethod::default_for).collect(),
            seeds: (0..5).collect(),
            train: TrainConfig::default(),
            importance: ImportanceConfig::default(),
            importance_ks: vec![2],
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.hexagon.validate()?;
        self.source_counts.validate()?;
        self.train.validate()?;
        self.importance.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        for m in &self.methods {
            m.validate()?;
        }
        let labels: BTreeSet<String> = self.methods.iter().map(|m| m.label()).collect();
        if labels.len() != self.methods.len() {
            return Err(Error::Config("methods must have distinct labels".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.n_target == 0 || self.n_eval == 0 {
            return Err(Error::Config("n_target and n_eval must be positive".into()));
        }
        if self.importance_ks.contains(&0) {
            return Err(Error::Config("importance_ks entries must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON with the output directory removed.
    pub fn digest(&self) -> Result<String> {
        json_digest(&Self {
            out: None,
            ..self.clone()
        })
    }

    /// The configured settings for `tag`, or its defaults.
    pub fn method(&self, tag: MethodTag) -> AdaptationMethod {
        self.methods
            .iter()
            .copied()
            .find(|m| m.tag() == tag)
            .unwrap_or_else(|| AdaptationMethod::default_for(tag))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_covers_every_method() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.methods.len(), 7);
        assert_eq!(cfg.seeds.len(), 5);
    }

    #[test]
    fn digest_ignores_output_directory() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            out: Some("/tmp/elsewhere".into()),
            ..a.clone()
        };
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        let c = ExperimentConfig {
            n_eval: 5,
            ..a.clone()
        };
        assert_ne!(a.digest().unwrap(), c.digest().unwrap());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"seeds": [7], "methods": [{"method": "source_only"}]}"#).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_target, 3000);
        assert_eq!(cfg.method(MethodTag::Bbsc), AdaptationMethod::Bbsc { bins: 2 });
    }

    #[test]
    fn duplicate_seeds_are_rejected() {
        let cfg = ExperimentConfig {
            seeds: vec![1, 1],
            ..ExperimentConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
