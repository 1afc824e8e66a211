//! Importance estimators used by the reweighting baselines.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::predictor::TrainConfig;
use crate::error::{Error, Result};
use crate::importance::label_bin;
use crate::nets::{softmax, Activation, Mlp, MlpSpec, OptimizerState};
use crate::rng::{self, streams};
use crate::toy::Dataset;

/// Weight range applied by both estimators.
pub const WEIGHT_CLIP: [f64; 2] = [1e-3, 1e3];
const CLASSIFIER_HIDDEN: [usize; 1] = [32];
/// Logit spread below which the domain classifier is treated as constant.
const DEGENERATE_SPREAD: f64 = 1e-6;
/// Reciprocal condition number below which the confusion matrix is singular.
const SINGULAR_RCOND: f64 = 1e-10;

/// Minibatch cross-entropy training of a softmax classifier over scalar inputs.
/// `classes` of width one means a single logistic logit.
fn train_classifier(xs: &[f64], labels: &[usize], classes: usize, cfg: &TrainConfig, seed: u64) -> Result<Mlp> {
    let width = if classes == 2 { 1 } else { classes };
    let mut r = rng::stream(seed, streams::CLASSIFIER);
    let mut net = Mlp::init(MlpSpec::new(1, &CLASSIFIER_HIDDEN, width, Activation::Tanh), &mut r)?;
    let mut opt = OptimizerState::new(cfg.optimizer, net.params.len());
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let batch = cfg.batch_size.min(xs.len());
    for _ in 0..cfg.classifier_epochs {
        order.shuffle(&mut r);
        for rows in order.chunks_exact(batch) {
            let bx: Vec<f64> = rows.iter().map(|&i| xs[i]).collect();
            let tape = net.forward_tape(ndarray::ArrayView2::from_shape((bx.len(), 1), &bx).expect("column"))?;
            let out = tape.output();
            let n = rows.len() as f64;
            let mut up = Array2::zeros(out.dim());
            for (r_i, &i) in rows.iter().enumerate() {
                if width == 1 {
                    let p = 1.0 / (1.0 + (-out[[r_i, 0]]).exp());
                    up[[r_i, 0]] = (p - labels[i] as f64) / n;
                } else {
                    let p = softmax(out.row(r_i).as_slice().expect("contiguous"));
                    for (c, pc) in p.iter().enumerate() {
                        up[[r_i, c]] = (pc - f64::from(u8::from(c == labels[i]))) / n;
                    }
                }
            }
            let grads = net.backward_tape(&tape, up.view())?;
            opt.step(&mut net.params, &grads.params)?;
        }
    }
    Ok(net)
}

fn require_nonempty(source: &Dataset, target: &Dataset) -> Result<()> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Config("importance baselines need non-empty source and target data".into()));
    }
    Ok(())
}

/// Covariate-shift weights from a source-vs-target logistic classifier:
/// `w(x) = P(target|x) / P(source|x) * n_S / n_T`, clipped.
pub fn ssbc_weights(source: &Dataset, target: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<Vec<f64>> {
    require_nonempty(source, target)?;
    cfg.validate()?;
    let (sx, tx) = (source.xs(), target.xs());
    let xs: Vec<f64> = sx.iter().chain(&tx).copied().collect();
    let labels: Vec<usize> = (0..xs.len()).map(|i| usize::from(i >= sx.len())).collect();
    let net = train_classifier(&xs, &labels, 2, cfg, seed)?;
    let logits = net.forward_scalars(&sx)?.column(0).to_vec();
    let (lo, hi) = logits.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < DEGENERATE_SPREAD {
        log::warn!("domain classifier is constant over the source; weights are uniform");
    }
    let ratio = sx.len() as f64 / tx.len() as f64;
    Ok(logits
        .iter()
        .map(|l| (l.exp() * ratio).clamp(WEIGHT_CLIP[0], WEIGHT_CLIP[1]))
        .collect())
}

/// Output of the black-box label-shift solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinImportance {
    /// Importance per label bin.
    pub ratios: Vec<f64>,
    /// Source frequency of each true bin.
    pub source_mass: Vec<f64>,
    /// Whether the non-negative least-squares fallback was used.
    pub fallback: bool,
}

/// Solves `confusion r = target_pred` where `confusion[i][j] = P_S(pred i, true j)`,
/// clips negatives to zero and rescales so that `sum_j source_mass_j r_j = 1`.
/// A singular confusion matrix falls back to non-negative least squares.
pub fn bbsc_solve(confusion: &DMatrix<f64>, target_pred: &DVector<f64>, source_mass: &[f64]) -> Result<BinImportance> {
    let b = confusion.nrows();
    if confusion.ncols() != b || target_pred.len() != b || source_mass.len() != b {
        return Err(Error::DimensionMismatch {
            expected: b,
            got: target_pred.len(),
        });
    }
    let sv = confusion.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let solved = (smax > 0.0 && smin / smax > SINGULAR_RCOND)
        .then(|| confusion.clone().lu().solve(target_pred))
        .flatten();
    let (raw, fallback) = match solved {
        Some(r) => (r, false),
        None => {
            log::warn!("confusion matrix is singular; using non-negative least squares");
            (nnls(confusion, target_pred), true)
        }
    };
    let mut ratios: Vec<f64> = raw.iter().map(|r| r.max(0.0)).collect();
    let mass: f64 = ratios.iter().zip(source_mass).map(|(r, p)| r * p).sum();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidDistribution("bin importance has no source mass".into()));
    }
    ratios.iter_mut().for_each(|r| *r /= mass);
    Ok(BinImportance {
        ratios,
        source_mass: source_mass.to_vec(),
        fallback,
    })
}

/// Lawson-Hanson active-set solver for `min |A x - b|` subject to `x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let tol = 1e-12 * a.norm().max(1.0);
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = a.select_columns(&idx);
        let z = sub.svd(true, true).solve(b, 1e-14).expect("both factors computed");
        let mut full = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            full[j] = z[k];
        }
        full
    };
    for _ in 0..3 * n + 10 {
        let grad = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j] && grad[j] > tol).max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let z = solve_passive(&passive);
            if (0..n).all(|k| !passive[k] || z[k] > 0.0) {
                x = z;
                break;
            }
            let alpha = (0..n)
                .filter(|&k| passive[k] && z[k] <= 0.0)
                .map(|k| x[k] / (x[k] - z[k]))
                .fold(f64::INFINITY, f64::min);
            x += (&z - &x) * alpha;
            for k in 0..n {
                if passive[k] && x[k] <= tol {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
        }
    }
    x
}

/// Black-box shift correction over `bins` equal-width label bins.
/// Returns per-source-sample weights `r(bin(y_i))` and the bin solution.
pub fn bbsc_weights(
    source: &Dataset,
    target: &Dataset,
    bins: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Vec<f64>, BinImportance)> {
    require_nonempty(source, target)?;
    cfg.validate()?;
    if bins < 2 {
        return Err(Error::Config(format!("label-shift correction needs at least 2 bins, got {bins}")));
    }
    let (sx, sy) = (source.xs(), source.ys());
    let truth: Vec<usize> = sy.iter().map(|&y| label_bin(y, bins)).collect();
    let net = train_classifier(&sx, &truth, bins, cfg, seed)?;
    let predict = |xs: &[f64]| -> Result<Vec<usize>> {
        let out = net.forward_scalars(xs)?;
        Ok(out
            .rows()
            .into_iter()
            .map(|row| {
                if bins == 2 {
                    usize::from(row[0] > 0.0)
                } else {
                    (0..bins).max_by(|&a, &b| row[a].total_cmp(&row[b])).expect("bins >= 2")
                }
            })
            .collect())
    };
    let n_s = sx.len() as f64;
    let mut confusion = DMatrix::zeros(bins, bins);
    let mut source_mass = vec![0.0; bins];
    for (p, t) in predict(&sx)?.into_iter().zip(&truth) {
        confusion[(p, *t)] += 1.0 / n_s;
        source_mass[*t] += 1.0 / n_s;
    }
    let target_pred = predict(&target.xs())?;
    let mut mu = DVector::zeros(bins);
    for p in &target_pred {
        mu[*p] += 1.0 / target_pred.len() as f64;
    }
    let solution = bbsc_solve(&confusion, &mu, &source_mass)?;
    let weights = truth
        .iter()
        .map(|&j| solution.ratios[j].clamp(WEIGHT_CLIP[0], WEIGHT_CLIP[1]))
        .collect();
    Ok((weights, solution))
}
