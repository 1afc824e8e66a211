use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::{aggregate, evaluate_nll, CellResult, ImportanceRecovery, RunReport};
use crate::adaptation::{train_method, train_plain, AdaptationMethod, MethodInputs, TrainedPredictor};
use crate::error::Result;
use crate::importance::{cluster_purity, fit_unsupervised_with, quadrant_products, FittedFactors, ImportanceConfig};
use crate::rng::{derive_seed, streams};
use crate::toy::{ground_truth_importance, sample_source, sample_target, Dataset, GroundTruthFactors};

/// The three samples of one seed.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub source: Dataset,
    /// Adaptation target; its labels are read only by target-supervised methods.
    pub target: Dataset,
    pub eval: Dataset,
}

pub fn seed_data(cfg: &ExperimentConfig, seed: u64) -> Result<SeedData> {
    let source = sample_source(&cfg.hexagon, &cfg.source_counts, seed)?;
    let target = sample_target(&cfg.hexagon, cfg.n_target, seed)?;
    let eval = if cfg.eval_on_train {
        target.clone()
    } else {
        sample_target(&cfg.hexagon, cfg.n_eval, derive_seed(seed, streams::EVAL))?
    };
    Ok(SeedData { source, target, eval })
}

/// Per-quadrant comparison of fitted factors against the exact importance.
pub fn recovery(factors: &FittedFactors, truth: &GroundTruthFactors, source: &Dataset, seed: u64) -> Result<ImportanceRecovery> {
    let products = quadrant_products(&factors.u, &factors.v, source)?;
    let mut relative_error = [0.0; 4];
    for (i, e) in relative_error.iter_mut().enumerate() {
        *e = (products[i] - truth.w_per_quadrant[i]).abs() / truth.w_per_quadrant[i];
    }
    Ok(ImportanceRecovery {
        k: factors.u.k(),
        seed,
        quadrant_products: products,
        relative_error,
        cluster_purity: cluster_purity(&factors.u, &source.xs())?,
    })
}

/// Unsupervised importance fit with `k` sub-domains against a given source conditional.
pub fn fit_importance_k(
    cfg: &ExperimentConfig,
    data: &SeedData,
    conditional: &TrainedPredictor,
    k: usize,
    seed: u64,
) -> Result<(FittedFactors, ImportanceRecovery)> {
    let icfg = ImportanceConfig {
        k,
        ..cfg.importance.clone()
    };
    let truth = ground_truth_importance(&cfg.hexagon, &cfg.source_counts)?;
    let factors = fit_unsupervised_with(&data.source, &data.target, conditional, &icfg, seed)?;
    let rec = recovery(&factors, &truth, &data.source, seed)?;
    Ok((factors, rec))
}

/// A finished cell with the model kept for plotting.
#[derive(Debug, Clone)]
pub struct Cell {
    pub result: CellResult,
    pub model: Option<TrainedPredictor>,
}

/// Report plus the artifacts needed for plot emission.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: RunReport,
    pub cells: Vec<Cell>,
    /// Importance fits on the first seed, one per configured `K`.
    pub importance_fits: Vec<FittedFactors>,
}

impl ExperimentOutput {
    /// Model of `method` on the first configured seed.
    pub fn first_model(&self, method: &str) -> Option<&TrainedPredictor> {
        let seed = self.cells.first()?.result.seed;
        self.cells
            .iter()
            .find(|c| c.result.method == method && c.result.seed == seed)
            .and_then(|c| c.model.as_ref())
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    method: &AdaptationMethod,
    seed: u64,
    truth: &GroundTruthFactors,
    metrics_dir: Option<&Path>,
) -> Result<(CellResult, TrainedPredictor)> {
    let data = seed_data(cfg, seed)?;
    let inputs = MethodInputs {
        source: &data.source,
        target: &data.target,
        train: &cfg.train,
        importance: &cfg.importance,
        ground_truth: Some(truth),
        conditional: None,
    };
    let label = method.label();
    let mut sink = match metrics_dir.filter(|_| method.is_adversarial()) {
        Some(dir) => Some(BufWriter::new(File::create(dir.join(format!("metrics_{label}_seed{seed}.jsonl")))?)),
        None => None,
    };
    let outcome = train_method(method, &inputs, seed, sink.as_mut().map(|w| w as &mut dyn Write))?;
    if let Some(mut w) = sink {
        w.flush()?;
    }
    let importance = outcome
        .factors
        .as_ref()
        .map(|f| recovery(f, truth, &data.source, seed))
        .transpose()?;
    let result = CellResult {
        method: label,
        seed,
        nll: Some(evaluate_nll(&outcome.model, &data.eval)?),
        error: None,
        importance,
        bin_ratios: outcome.bins.map(|b| b.ratios),
    };
    Ok((result, outcome.model))
}

/// Trains and evaluates every (method, seed) cell in parallel. A failing cell
/// is recorded in the report and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig, metrics_dir: Option<&Path>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let truth = ground_truth_importance(&cfg.hexagon, &cfg.source_counts)?;
    let jobs: Vec<(u64, &AdaptationMethod)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.methods.iter().map(move |m| (s, m)))
        .collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(seed, method)| match run_cell(cfg, method, seed, &truth, metrics_dir) {
            Ok((result, model)) => Cell {
                result,
                model: Some(model),
            },
            Err(e) => {
                log::error!("{} seed {seed} failed: {e}", method.label());
                Cell {
                    result: CellResult {
                        method: method.label(),
                        seed,
                        nll: None,
                        error: Some(e.to_string()),
                        importance: None,
                        bin_ratios: None,
                    },
                    model: None,
                }
            }
        })
        .collect();

    let first = cfg.seeds[0];
    let fits: Vec<(FittedFactors, ImportanceRecovery)> = if cfg.importance_ks.is_empty() {
        Vec::new()
    } else {
        let data = seed_data(cfg, first)?;
        let conditional = train_plain(&data.source, &cfg.train, first)?;
        cfg.importance_ks
            .par_iter()
            .map(|&k| fit_importance_k(cfg, &data, &conditional, k, first))
            .collect::<Result<_>>()?
    };
    let (importance_fits, importance_by_k) = fits.into_iter().unzip();

    let results: Vec<CellResult> = cells.iter().map(|c| c.result.clone()).collect();
    let report = RunReport {
        config_digest: cfg.digest()?,
        analytic_nll: cfg.hexagon.analytic_target_nll(),
        eval_on_train: cfg.eval_on_train,
        summary: aggregate(&results),
        cells: results,
        importance_by_k,
    };
    Ok(ExperimentOutput {
        report,
        cells,
        importance_fits,
    })
}
