use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptation::MethodTag;
use crate::error::{Error, Result};
use crate::nets::Predictor;
use crate::toy::Dataset;

/// Mean Gaussian negative log-likelihood of `model` over `data`.
pub fn evaluate_nll(model: &dyn Predictor, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Config("evaluation needs a non-empty labeled sample".into()));
    }
    let preds = model.predict_batch(&data.xs());
    let total: f64 = preds.iter().zip(data.ys()).map(|(p, y)| p.nll(y)).sum();
    Ok(total / data.len() as f64)
}

/// Per-quadrant recovery of the joint importance by a fitted `(U, V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRecovery {
    pub k: usize,
    pub seed: u64,
    /// Source-sample mean of `U V` per quadrant in `Quadrant` order.
    pub quadrant_products: [f64; 4],
    /// `|estimate - truth| / truth` per quadrant.
    pub relative_error: [f64; 4],
    pub cluster_purity: f64,
}

impl ImportanceRecovery {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_error.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub seed: u64,
    pub nll: Option<f64>,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub importance: Option<ImportanceRecovery>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bin_ratios: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Successful cells.
    pub n: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; absent below two successful cells.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_digest: String,
    pub analytic_nll: f64,
    pub eval_on_train: bool,
    pub cells: Vec<CellResult>,
    pub summary: Vec<MethodSummary>,
    pub importance_by_k: Vec<ImportanceRecovery>,
}

/// Mean and sample standard deviation per method, in first-appearance order.
pub fn aggregate(cells: &[CellResult]) -> Vec<MethodSummary> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for c in cells {
        let entry = groups.entry(&c.method).or_insert_with(|| {
            order.push(&c.method);
            (Vec::new(), 0)
        });
        match c.nll {
            Some(v) if c.error.is_none() => entry.0.push(v),
            _ => entry.1 += 1,
        }
    }
    order
        .into_iter()
        .map(|m| {
            let (values, failed) = &groups[m];
            let n = values.len();
            let mean = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
            let std = mean.filter(|_| n > 1).map(|mu| {
                (values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            });
            MethodSummary {
                method: m.to_string(),
                n,
                failed: *failed,
                mean,
                std,
            }
        })
        .collect()
}

impl RunReport {
    pub fn any_failed(&self) -> bool {
        self.cells.iter().any(|c| c.error.is_some())
    }

    pub fn mean_of(&self, method: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.method == method).and_then(|s| s.mean)
    }

    /// Recomputes the summary from the per-seed cells.
    pub fn reaggregate(&mut self) {
        self.summary = aggregate(&self.cells);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Plain-text table of the summary.
    pub fn table(&self) -> String {
        let mut out = format!("{:<14} {:>9} {:>9} {:>4}\n", "method", "nll", "std", "n");
        for s in &self.summary {
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(out, "{:<14} {:>9} {:>9} {:>4}", s.method, fmt(s.mean), fmt(s.std), s.n);
        }
        out
    }
}

/// One threshold of the benchmark check that a report did not meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub method: String,
    pub value: f64,
    pub rule: String,
}

pub const TARGET_ONLY_BAND: [f64; 2] = [0.59, 0.63];
pub const BASELINE_FLOOR: f64 = 0.70;
pub const JIADA_CEILING: f64 = 0.66;
pub const JIADA_MARGIN: f64 = 0.05;

/// Benchmark thresholds applied to the method means present in `report`.
pub fn check_report(report: &RunReport) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut fail = |method: &str, value: f64, rule: String| {
        out.push(Violation {
            method: method.to_string(),
            value,
            rule,
        })
    };
    for s in &report.summary {
        if s.failed > 0 {
            fail(&s.method, s.failed as f64, "cells failed".into());
        }
    }
    let target = MethodTag::TargetOnly.as_str();
    if let Some(v) = report.mean_of(target) {
        if !(TARGET_ONLY_BAND[0]..=TARGET_ONLY_BAND[1]).contains(&v) {
            fail(target, v, format!("outside [{}, {}]", TARGET_ONLY_BAND[0], TARGET_ONLY_BAND[1]));
        }
    }
    let baselines = [MethodTag::SourceOnly, MethodTag::Ssbc, MethodTag::Bbsc, MethodTag::Dann, MethodTag::Iwdan];
    let mut best = f64::INFINITY;
    for tag in baselines {
        if let Some(v) = report.mean_of(tag.as_str()) {
            best = best.min(v);
            if v < BASELINE_FLOOR {
                fail(tag.as_str(), v, format!("below {BASELINE_FLOOR}"));
            }
        }
    }
    let jiada = MethodTag::Jiada.as_str();
    if let Some(v) = report.mean_of(jiada) {
        if v > JIADA_CEILING {
            fail(jiada, v, format!("above {JIADA_CEILING}"));
        }
        if best.is_finite() && v > best - JIADA_MARGIN {
            fail(jiada, v, format!("not {JIADA_MARGIN} below the best baseline {best:.4}"));
        }
    }
    out
}
