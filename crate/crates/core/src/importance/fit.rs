use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::models::{UModel, VFeatures, VModel};
use super::objective::{l_sup, l_unsup, ObjectiveBatch, ObjectiveValue};
use super::vtilde::{VTildeEstimator, VTildeMethod};
use crate::adaptation::{train_plain, TrainConfig};
use crate::error::{Error, Result};
use crate::nets::{OptimizerConfig, OptimizerState, Predictor};
use crate::rng::{self, streams, StreamRng};
use crate::toy::{Dataset, Quadrant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceConfig {
    /// Number of sub-domains of the data factor.
    pub k: usize,
    pub v_features: VFeatures,
    pub vtilde: VTildeMethod,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub classifier_hidden: Vec<usize>,
    pub v_hidden: Vec<usize>,
    /// Range that per-sample weights `U V` are clipped to for downstream training.
    pub clip: [f64; 2],
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            k: 2,
            v_features: VFeatures::Raw,
            vtilde: VTildeMethod::default(),
            epochs: 100,
            batch_size: 128,
            optimizer: OptimizerConfig::adam(3e-3),
            classifier_hidden: vec![32],
            v_hidden: vec![32],
            clip: [1e-3, 1e3],
        }
    }
}

impl ImportanceConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.k == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("k, batch_size and epochs must be positive".into()));
        }
        if !(self.clip[0] > 0.0 && self.clip[0] < self.clip[1]) {
            return Err(Error::Config(format!("invalid clip range {:?}", self.clip)));
        }
        if matches!(self.v_features, VFeatures::Bins { bins: 0 }) {
            return Err(Error::Config("label bins must be positive".into()));
        }
        Ok(())
    }

    pub fn init_models(&self, seed: u64) -> Result<(UModel, VModel)> {
        let mut r = rng::stream(seed, streams::IMPORTANCE);
        Ok((
            UModel::init(self.k, &self.classifier_hidden, &mut r)?,
            VModel::init(self.v_features, &self.v_hidden, &mut r)?,
        ))
    }
}

/// Learned factors after normalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedFactors {
    pub u: UModel,
    pub v: VModel,
    /// Mean batch loss per epoch.
    pub epoch_loss: Vec<f64>,
    /// Factor folded into `V` so that the source mean of `U V` is one.
    pub rescale: f64,
}

impl FittedFactors {
    pub fn products(&self, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
        products(&self.u, &self.v, xs, ys)
    }
}

pub fn products(u: &UModel, v: &VModel, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    let uv = u.eval(xs)?;
    let vv = v.eval(ys)?;
    Ok(uv.iter().zip(&vv).map(|(a, b)| a * b).collect())
}

type Objective = fn(&UModel, &VModel, &ObjectiveBatch, &ObjectiveBatch) -> Result<ObjectiveValue>;

/// Joint first-order minimisation over `(C, s, V)`. Each epoch shuffles both
/// index sets and `make_batch` turns index windows into objective batches.
fn optimize(
    u: &mut UModel,
    v: &mut VModel,
    cfg: &ImportanceConfig,
    sizes: (usize, usize),
    seed: u64,
    objective: Objective,
    mut make_batch: impl FnMut(&[usize], &[usize], &mut StreamRng) -> Result<(ObjectiveBatch, ObjectiveBatch)>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut shuffle = rng::stream(rng::derive_seed(seed, streams::IMPORTANCE), streams::SHUFFLE);
    let mut draws = rng::stream(seed, streams::CONDITIONAL);
    let mut opt_c = OptimizerState::new(cfg.optimizer, u.classifier.params.len());
    let mut opt_s = OptimizerState::new(cfg.optimizer, u.k());
    let mut opt_v = OptimizerState::new(cfg.optimizer, v.net.params.len());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        let windows = index_windows(sizes.0, sizes.1, cfg.batch_size, &mut shuffle);
        let mut total = 0.0;
        for (s, t) in &windows {
            let (sb, tb) = make_batch(s, t, &mut draws)?;
            let val = objective(u, v, &sb, &tb).map_err(|e| match e {
                Error::NonFiniteLoss { .. } => Error::NonFiniteLoss { step },
                other => other,
            })?;
            opt_c.step(&mut u.classifier.params, &val.grad.classifier)?;
            opt_s.step(&mut u.log_scores, &val.grad.log_scores)?;
            opt_v.step(&mut v.net.params, &val.grad.v_net)?;
            total += val.loss;
            step += 1;
        }
        history.push(total / windows.len() as f64);
    }
    Ok(history)
}

fn gather(values: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| values[i]).collect()
}

fn require_data(source: &Dataset, target: &Dataset) -> Result<()> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Config("importance fitting needs non-empty source and target data".into()));
    }
    Ok(())
}

/// Minimises the supervised objective from freshly initialised models.
pub fn fit_supervised(source: &Dataset, target: &Dataset, cfg: &ImportanceConfig, seed: u64) -> Result<FittedFactors> {
    let (u, v) = cfg.init_models(seed)?;
    fit_supervised_from(u, v, source, target, cfg, seed)
}

/// Minimises the supervised objective starting from the given models.
pub fn fit_supervised_from(
    mut u: UModel,
    mut v: VModel,
    source: &Dataset,
    target: &Dataset,
    cfg: &ImportanceConfig,
    seed: u64,
) -> Result<FittedFactors> {
    require_data(source, target)?;
    let (sx, sy, tx, ty) = (source.xs(), source.ys(), target.xs(), target.ys());
    let epoch_loss = optimize(&mut u, &mut v, cfg, (sx.len(), tx.len()), seed, l_sup, |s, t, _| {
        Ok((
            ObjectiveBatch::labeled(&gather(&sx, s), &gather(&sy, s))?,
            ObjectiveBatch::labeled(&gather(&tx, t), &gather(&ty, t))?,
        ))
    })?;
    let rescale = normalize_factors(&u, &mut v, source)?;
    Ok(FittedFactors {
        u,
        v,
        epoch_loss,
        rescale,
    })
}

/// Two stages: a Gaussian source conditional, then the unsupervised objective.
pub fn fit_unsupervised(
    source: &Dataset,
    target: &Dataset,
    cfg: &ImportanceConfig,
    conditional_cfg: &TrainConfig,
    seed: u64,
) -> Result<FittedFactors> {
    let conditional = train_plain(source, conditional_cfg, seed)?;
    fit_unsupervised_with(source, target, &conditional, cfg, seed)
}

/// Unsupervised fit against an already trained source conditional. Target labels are never read.
pub fn fit_unsupervised_with(
    source: &Dataset,
    target: &Dataset,
    conditional: &dyn Predictor,
    cfg: &ImportanceConfig,
    seed: u64,
) -> Result<FittedFactors> {
    require_data(source, target)?;
    let (mut u, mut v) = cfg.init_models(seed)?;
    let (sx, tx) = (source.xs(), target.xs());
    let s_est = VTildeEstimator::new(cfg.vtilde, conditional, &sx)?;
    let t_est = VTildeEstimator::new(cfg.vtilde, conditional, &tx)?;
    let epoch_loss = optimize(&mut u, &mut v, cfg, (sx.len(), tx.len()), seed, l_unsup, |s, t, draws| {
        Ok((
            ObjectiveBatch::unlabeled(&gather(&sx, s), s_est.nodes(s, draws))?,
            ObjectiveBatch::unlabeled(&gather(&tx, t), t_est.nodes(t, draws))?,
        ))
    })?;
    let rescale = normalize_factors(&u, &mut v, source)?;
    Ok(FittedFactors {
        u,
        v,
        epoch_loss,
        rescale,
    })
}

/// Folds one scalar into `V`'s output bias so the source mean of `U V` is one;
/// returns that scalar.
pub fn normalize_factors(u: &UModel, v: &mut VModel, source: &Dataset) -> Result<f64> {
    if source.is_empty() {
        return Err(Error::Config("normalisation needs source samples".into()));
    }
    let w = products(u, v, &source.xs(), &source.ys())?;
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::NonFiniteLoss { step: 0 });
    }
    let factor = 1.0 / mean;
    v.rescale(factor);
    Ok(factor)
}

/// Mean of `U V` over the samples of each quadrant (NaN for an empty quadrant).
pub fn quadrant_products(u: &UModel, v: &VModel, data: &Dataset) -> Result<[f64; 4]> {
    let w = products(u, v, &data.xs(), &data.ys())?;
    let mut sums = [0.0; 4];
    let mut counts = [0usize; 4];
    for (s, w) in data.samples.iter().zip(w) {
        let q = s.quadrant().index();
        sums[q] += w;
        counts[q] += 1;
    }
    Ok(Quadrant::ALL.map(|q| sums[q.index()] / counts[q.index()] as f64))
}

/// Per-sample weights `U(x) V(y)` clipped to `clip`.
pub fn sample_weights(u: &UModel, v: &VModel, data: &Dataset, clip: [f64; 2]) -> Result<Vec<f64>> {
    Ok(products(u, v, &data.xs(), &data.ys())?
        .into_iter()
        .map(|w| w.clamp(clip[0], clip[1]))
        .collect())
}

/// Purity of the hard sub-domain assignment against the sign of `x`.
pub fn cluster_purity(u: &UModel, xs: &[f64]) -> Result<f64> {
    let assign = u.assign(xs)?;
    let mut table = vec![[0usize; 2]; u.k()];
    for (&k, &x) in assign.iter().zip(xs) {
        table[k][usize::from(x < 0.0)] += 1;
    }
    let hits: usize = table.iter().map(|c| c[0].max(c[1])).sum();
    Ok(hits as f64 / xs.len().max(1) as f64)
}

fn index_windows(n_source: usize, n_target: usize, batch: usize, rng: &mut StreamRng) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut ps: Vec<usize> = (0..n_source).collect();
    let mut pt: Vec<usize> = (0..n_target).collect();
    ps.shuffle(rng);
    pt.shuffle(rng);
    let n_batches = (n_source / batch).max(1);
    let bs = batch.min(n_source);
    let bt = batch.min(n_target);
    (0..n_batches)
        .map(|b| {
            let s = ps[b * bs..(b + 1) * bs].to_vec();
            let t = (0..bt).map(|j| pt[(b * bt + j) % n_target]).collect();
            (s, t)
        })
        .collect()
}
