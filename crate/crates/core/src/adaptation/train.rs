use std::io::Write;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::Serialize;

use super::predictor::{Provenance, TrainConfig, TrainedPredictor};
use crate::digest::json_digest;
use crate::error::{Error, Result};
use crate::nets::{gaussian_nll, Mlp, OptimizerState, Tape};
use crate::rng::{self, streams, StreamRng};
use crate::toy::Dataset;

/// Discriminator loss below which a step counts towards collapse.
const COLLAPSE_LOSS: f64 = 0.01;
/// Consecutive low-loss steps that trigger the collapse warning.
const COLLAPSE_STEPS: usize = 100;

/// One line of the per-step metrics stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMetrics {
    pub step: usize,
    pub loss_pred: f64,
    pub loss_disc: f64,
    pub lambda: f64,
}

/// Reversal weight at `step` of `total`: linear from 0 over the warm-up, then flat.
pub fn lambda_schedule(lambda: f64, warmup_fraction: f64, step: usize, total: usize) -> f64 {
    let warmup = warmup_fraction * total as f64;
    if warmup <= 0.0 {
        return lambda;
    }
    lambda * (step as f64 / warmup).min(1.0)
}

fn column(xs: &[f64]) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((xs.len(), 1), xs).expect("column")
}

fn gather(values: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| values[i]).collect()
}

/// `ln(1 + e^t)` and its derivative.
fn softplus(t: f64) -> (f64, f64) {
    let value = if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
    let slope = if t >= 0.0 { 1.0 / (1.0 + (-t).exp()) } else { t.exp() / (1.0 + t.exp()) };
    (value, slope)
}

/// Weighted prediction loss `sum_i w_i nll_i / b` on one batch.
struct PredictionPass {
    loss: f64,
    encoder_tape: Tape,
    predictor_grad: Vec<f64>,
    feature_grad: Array2<f64>,
}

fn prediction_pass(model: &TrainedPredictor, xs: &[f64], ys: &[f64], weights: &[f64]) -> Result<PredictionPass> {
    let encoder_tape = model.encoder.forward_tape(column(xs))?;
    let predictor_tape = model.predictor.forward_tape(encoder_tape.output().view())?;
    let out = predictor_tape.output();
    let b = xs.len() as f64;
    let mut upstream = Array2::zeros(out.dim());
    let mut loss = 0.0;
    for i in 0..xs.len() {
        let g = gaussian_nll(out[[i, 0]], out[[i, 1]], ys[i]);
        loss += weights[i] * g.loss / b;
        upstream[[i, 0]] = weights[i] * g.d_mu / b;
        upstream[[i, 1]] = weights[i] * g.d_log_sigma / b;
    }
    let grads = model.predictor.backward_tape(&predictor_tape, upstream.view())?;
    Ok(PredictionPass {
        loss,
        encoder_tape,
        predictor_grad: grads.params,
        feature_grad: grads.input,
    })
}

/// Domain loss with source label 1: `sum_i w_i softplus(-d_i) / b_s + sum_j softplus(d_j) / b_t`.
/// Returns the loss and the gradients of the discriminator parameters and of its input rows.
fn discriminator_pass(disc: &Mlp, features: ArrayView2<f64>, n_source: usize, weights: &[f64]) -> Result<(f64, Vec<f64>, Array2<f64>)> {
    let tape = disc.forward_tape(features)?;
    let logits = tape.output();
    let n_target = logits.nrows() - n_source;
    let mut upstream = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for i in 0..logits.nrows() {
        let d = logits[[i, 0]];
        if i < n_source {
            let (v, slope) = softplus(-d);
            let scale = weights[i] / n_source as f64;
            loss += scale * v;
            upstream[[i, 0]] = -scale * slope;
        } else {
            let (v, slope) = softplus(d);
            let scale = 1.0 / n_target as f64;
            loss += scale * v;
            upstream[[i, 0]] = scale * slope;
        }
    }
    let grads = disc.backward_tape(&tape, upstream.view())?;
    Ok((loss, grads.params, grads.input))
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::Config(format!("sample weights must be positive and finite, found {bad}")));
    }
    Ok(())
}

/// Shuffled source batches of `batch` rows (at least one batch, the tail is
/// dropped) paired with wrapping target windows of the same size.
fn epoch_windows(
    n_source: usize,
    n_target: usize,
    batch: usize,
    source_rng: &mut StreamRng,
    target_rng: Option<&mut StreamRng>,
) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut ps: Vec<usize> = (0..n_source).collect();
    ps.shuffle(source_rng);
    let mut pt: Vec<usize> = (0..n_target).collect();
    if let Some(r) = target_rng {
        pt.shuffle(r);
    }
    let bs = batch.min(n_source);
    let bt = batch.min(n_target);
    (0..(n_source / bs).max(1))
        .map(|b| {
            let s = ps[b * bs..(b + 1) * bs].to_vec();
            let t = (0..bt).map(|j| pt[(b * bt + j) % n_target.max(1)]).collect();
            (s, t)
        })
        .collect()
}

fn new_model(cfg: &TrainConfig, method: &str, seed: u64) -> Result<TrainedPredictor> {
    cfg.validate()?;
    let provenance = Provenance {
        method: method.to_string(),
        seed,
        config_digest: json_digest(cfg)?,
    };
    TrainedPredictor::init(cfg, provenance, &mut rng::stream(seed, streams::INIT))
}

fn require_labeled(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Config("training needs a non-empty dataset".into()));
    }
    Ok(())
}

/// Mean Gaussian NLL on `data`.
pub fn train_plain(data: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<TrainedPredictor> {
    let method = format!("{}_only", data.domain.as_str());
    train_weighted(data, None, cfg, seed, &method)
}

/// Weighted mean NLL `sum_i w_i nll_i / n`; `None` means unit weights.
pub fn train_weighted(
    data: &Dataset,
    weights: Option<&[f64]>,
    cfg: &TrainConfig,
    seed: u64,
    method: &str,
) -> Result<TrainedPredictor> {
    require_labeled(data)?;
    let unit = vec![1.0; data.len()];
    let weights = weights.unwrap_or(&unit);
    check_weights(weights, data.len())?;
    let mut model = new_model(cfg, method, seed)?;
    let (xs, ys) = (data.xs(), data.ys());
    let mut shuffle = rng::stream(seed, streams::SHUFFLE);
    let mut opt_e = OptimizerState::new(cfg.optimizer, model.encoder.params.len());
    let mut opt_f = OptimizerState::new(cfg.optimizer, model.predictor.params.len());
    let mut step = 0;
    for _ in 0..cfg.epochs {
        for (rows, _) in epoch_windows(xs.len(), 0, cfg.batch_size, &mut shuffle, None) {
            let pass = prediction_pass(&model, &gather(&xs, &rows), &gather(&ys, &rows), &gather(weights, &rows))?;
            if !pass.loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            let enc = model.encoder.backward_tape(&pass.encoder_tape, pass.feature_grad.view())?;
            opt_f.step(&mut model.predictor.params, &pass.predictor_grad)?;
            opt_e.step(&mut model.encoder.params, &enc.params)?;
            step += 1;
        }
    }
    Ok(model)
}

/// Adversarial feature alignment with per-sample source weights.
///
/// Each batch takes one discriminator step on the frozen features, then one
/// encoder/predictor step in which the encoder receives the prediction
/// gradient minus `lambda_t` times the discriminator's input gradient. Source
/// weights scale both the prediction loss and the source half of the domain
/// loss; target rows are unweighted. With `lambda == 0` the discriminator is
/// never built and the run equals [`train_weighted`] with the same seed.
#[allow(clippy::too_many_arguments)]
pub fn train_adversarial(
    source: &Dataset,
    target: &Dataset,
    weights: &[f64],
    lambda: f64,
    cfg: &TrainConfig,
    seed: u64,
    method: &str,
    mut metrics: Option<&mut dyn Write>,
) -> Result<TrainedPredictor> {
    if lambda == 0.0 {
        return train_weighted(source, Some(weights), cfg, seed, method);
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    require_labeled(source)?;
    if target.is_empty() {
        return Err(Error::Config("adversarial training needs target inputs".into()));
    }
    check_weights(weights, source.len())?;
    let mut model = new_model(cfg, method, seed)?;
    let mut disc = Mlp::init(cfg.discriminator_spec(), &mut rng::stream(seed, streams::DISC_INIT))?;
    let (xs, ys, xt) = (source.xs(), source.ys(), target.xs());
    let mut shuffle = rng::stream(seed, streams::SHUFFLE);
    let mut target_shuffle = rng::stream(seed, streams::TARGET_SHUFFLE);
    let mut opt_e = OptimizerState::new(cfg.optimizer, model.encoder.params.len());
    let mut opt_f = OptimizerState::new(cfg.optimizer, model.predictor.params.len());
    let mut opt_d = OptimizerState::new(cfg.optimizer, disc.params.len());

    let per_epoch = (xs.len() / cfg.batch_size.min(xs.len())).max(1);
    let total = per_epoch * cfg.epochs;
    let mut low_loss_run = 0;
    let mut warned = false;
    let mut step = 0;
    for _ in 0..cfg.epochs {
        for (s_rows, t_rows) in epoch_windows(xs.len(), xt.len(), cfg.batch_size, &mut shuffle, Some(&mut target_shuffle)) {
            let lam = lambda_schedule(lambda, cfg.warmup_fraction, step, total);
            let w = gather(weights, &s_rows);
            let pass = prediction_pass(&model, &gather(&xs, &s_rows), &gather(&ys, &s_rows), &w)?;
            let target_tape = model.encoder.forward_tape(column(&gather(&xt, &t_rows)))?;
            let features = concatenate(
                Axis(0),
                &[pass.encoder_tape.output().view(), target_tape.output().view()],
            )
            .expect("equal feature width");

            let (loss_disc, d_grad, _) = discriminator_pass(&disc, features.view(), s_rows.len(), &w)?;
            if !(pass.loss.is_finite() && loss_disc.is_finite()) {
                return Err(Error::NonFiniteLoss { step });
            }
            opt_d.step(&mut disc.params, &d_grad)?;

            let (_, _, feature_grad) = discriminator_pass(&disc, features.view(), s_rows.len(), &w)?;
            let ns = s_rows.len();
            let source_up = &pass.feature_grad - &(feature_grad.slice(s![..ns, ..]).to_owned() * lam);
            let target_up = feature_grad.slice(s![ns.., ..]).to_owned() * -lam;
            let mut enc_grad = model.encoder.backward_tape(&pass.encoder_tape, source_up.view())?.params;
            let target_grad = model.encoder.backward_tape(&target_tape, target_up.view())?.params;
            enc_grad.iter_mut().zip(target_grad).for_each(|(a, b)| *a += b);
            opt_f.step(&mut model.predictor.params, &pass.predictor_grad)?;
            opt_e.step(&mut model.encoder.params, &enc_grad)?;

            low_loss_run = if loss_disc < COLLAPSE_LOSS { low_loss_run + 1 } else { 0 };
            if low_loss_run >= COLLAPSE_STEPS && !warned {
                log::warn!("{method} seed {seed}: discriminator loss below {COLLAPSE_LOSS} for {COLLAPSE_STEPS} steps at step {step}");
                warned = true;
            }
            if let Some(out) = metrics.as_deref_mut() {
                let record = StepMetrics {
                    step,
                    loss_pred: pass.loss,
                    loss_disc,
                    lambda: lam,
                };
                writeln!(out, "{}", serde_json::to_string(&record)?)?;
            }
            step += 1;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::Predictor;
    use crate::toy::{Domain, LabeledSample};

    fn constant_data(n: usize, y: f64) -> Dataset {
        Dataset {
            samples: (0..n)
                .map(|i| LabeledSample {
                    x: -0.9 + 1.8 * i as f64 / (n - 1) as f64,
                    y,
                })
                .collect(),
            domain: Domain::Source,
            seed: 0,
        }
    }

    fn small_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            encoder_hidden: vec![16],
            feature_dim: 8,
            predictor_hidden: vec![16],
            discriminator_hidden: vec![16],
            epochs,
            batch_size: 10,
            ..TrainConfig::default()
        }
    }

    fn mean_nll(model: &TrainedPredictor, data: &Dataset) -> f64 {
        let preds = model.predict_batch(&data.xs());
        preds.iter().zip(data.ys()).map(|(p, y)| p.nll(y)).sum::<f64>() / data.len() as f64
    }

    #[test]
    fn overfits_a_constant() {
        let data = constant_data(10, 0.3);
        let before = mean_nll(&new_model(&small_cfg(1), "t", 3).unwrap(), &data);
        let model = train_plain(&data, &small_cfg(400), 3).unwrap();
        for p in model.predict_batch(&data.xs()) {
            assert!((p.mu - 0.3).abs() < 0.05, "{p:?}");
        }
        assert!(mean_nll(&model, &data) < before);
    }

    #[test]
    fn warmup_is_linear_then_flat() {
        assert_eq!(lambda_schedule(1.0, 0.2, 0, 100), 0.0);
        assert!((lambda_schedule(1.0, 0.2, 10, 100) - 0.5).abs() < 1e-15);
        assert_eq!(lambda_schedule(1.0, 0.2, 20, 100), 1.0);
        assert_eq!(lambda_schedule(0.7, 0.0, 0, 100), 0.7);
    }

    #[test]
    fn zero_lambda_is_weighted_training() {
        let data = constant_data(20, -0.2);
        let w = vec![1.0; 20];
        let cfg = small_cfg(3);
        let a = train_adversarial(&data, &data, &w, 0.0, &cfg, 5, "m", None).unwrap();
        let b = train_weighted(&data, None, &cfg, 5, "m").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prediction_loss_is_linear_in_weights() {
        let data = constant_data(12, 0.1);
        let model = new_model(&small_cfg(1), "t", 9).unwrap();
        let (xs, ys) = (data.xs(), data.ys());
        let w: Vec<f64> = (0..12).map(|i| 0.5 + i as f64 / 10.0).collect();
        let w2: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        let a = prediction_pass(&model, &xs, &ys, &w).unwrap();
        let b = prediction_pass(&model, &xs, &ys, &w2).unwrap();
        assert!((b.loss - 2.0 * a.loss).abs() <= 1e-12 * a.loss.abs());
        for (ga, gb) in a.predictor_grad.iter().zip(&b.predictor_grad) {
            assert!((gb - 2.0 * ga).abs() <= 1e-9 * ga.abs().max(1e-12));
        }
    }

    #[test]
    fn discriminator_gradient_matches_finite_differences() {
        let mut r = rng::seeded(2);
        let disc = Mlp::init(small_cfg(1).discriminator_spec(), &mut r).unwrap();
        let feats = Array2::from_shape_fn((7, 8), |(i, j)| ((i * 8 + j) as f64 * 0.37).sin());
        let w = [0.5, 2.0, 1.0, 0.25];
        let (_, g, gin) = discriminator_pass(&disc, feats.view(), 4, &w).unwrap();
        let h = 1e-6;
        for i in (0..disc.params.len()).step_by(7) {
            let (mut a, mut b) = (disc.clone(), disc.clone());
            a.params[i] += h;
            b.params[i] -= h;
            let num = (discriminator_pass(&a, feats.view(), 4, &w).unwrap().0
                - discriminator_pass(&b, feats.view(), 4, &w).unwrap().0)
                / (2.0 * h);
            assert!((num - g[i]).abs() <= 1e-6 * num.abs().max(1e-3));
        }
        let mut f = feats.clone();
        f[[5, 3]] += h;
        let up = discriminator_pass(&disc, f.view(), 4, &w).unwrap().0;
        f[[5, 3]] -= 2.0 * h;
        let down = discriminator_pass(&disc, f.view(), 4, &w).unwrap().0;
        assert!(((up - down) / (2.0 * h) - gin[[5, 3]]).abs() < 1e-8);
    }

    #[test]
    fn metrics_stream_has_one_line_per_step() {
        let data = constant_data(20, 0.0);
        let w = vec![1.0; 20];
        let mut buf = Vec::new();
        train_adversarial(&data, &data, &w, 1.0, &small_cfg(2), 1, "dann", Some(&mut buf)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let last: serde_json::Value = serde_json::from_str(lines[3]).unwrap();
        assert_eq!(last["step"], 3);
        assert!(last["lambda"].as_f64().unwrap() > 0.0);
    }
}
