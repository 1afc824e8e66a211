use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::{softmax, Activation, Mlp, MlpSpec, Tape};
use crate::rng::StreamRng;

/// Data factor `U(x) = sum_k exp(s_k) C_k(x)` with a softmax classifier `C`
/// splitting the data space into `K` sub-domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UModel {
    pub classifier: Mlp,
    /// `s_k`, stored in the log domain.
    pub log_scores: Vec<f64>,
}

/// Forward state of [`UModel`] kept for the reverse pass.
pub struct UForward {
    tape: Tape,
    /// `n x K` sub-domain memberships.
    pub memberships: Array2<f64>,
    pub values: Vec<f64>,
}

impl UModel {
    pub fn init(k: usize, hidden: &[usize], rng: &mut StreamRng) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("at least one sub-domain is required".into()));
        }
        Ok(Self {
            classifier: Mlp::init(MlpSpec::new(1, hidden, k, Activation::Tanh), rng)?,
            log_scores: vec![0.0; k],
        })
    }

    pub fn k(&self) -> usize {
        self.log_scores.len()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.log_scores.iter().map(|s| s.exp()).collect()
    }

    pub fn forward(&self, xs: &[f64]) -> Result<UForward> {
        let tape = self.classifier.forward_tape(column(xs))?;
        let k = self.k();
        let scores = self.scores();
        let mut memberships = Array2::zeros((xs.len(), k));
        let mut values = Vec::with_capacity(xs.len());
        for (i, logits) in tape.output().rows().into_iter().enumerate() {
            let c = softmax(logits.as_slice().expect("contiguous rows"));
            values.push(c.iter().zip(&scores).map(|(c, s)| c * s).sum());
            memberships.row_mut(i).assign(&Array1::from(c));
        }
        Ok(UForward {
            tape,
            memberships,
            values,
        })
    }

    pub fn eval(&self, xs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(xs)?.values)
    }

    /// Hard sub-domain assignment of each input.
    pub fn assign(&self, xs: &[f64]) -> Result<Vec<usize>> {
        let f = self.forward(xs)?;
        Ok(f.memberships
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map_or(0, |(k, _)| k)
            })
            .collect())
    }

    /// Gradients `(classifier params, log scores)` given `dL/dU` per input.
    pub fn backward(&self, fwd: &UForward, d_values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let scores = self.scores();
        let k = self.k();
        let mut d_log_scores = vec![0.0; k];
        let mut d_logits = Array2::zeros((d_values.len(), k));
        for (i, &du) in d_values.iter().enumerate() {
            let c = fwd.memberships.row(i);
            let u = fwd.values[i];
            for j in 0..k {
                d_log_scores[j] += du * scores[j] * c[j];
                d_logits[[i, j]] = du * c[j] * (scores[j] - u);
            }
        }
        let grads = self.classifier.backward_tape(&fwd.tape, d_logits.view())?;
        Ok((grads.params, d_log_scores))
    }

    /// Multiplies `U` by `factor`.
    pub fn rescale(&mut self, factor: f64) {
        let shift = factor.ln();
        self.log_scores.iter_mut().for_each(|s| *s += shift);
    }
}

/// Input representation of the label factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VFeatures {
    /// The label value itself.
    Raw,
    /// One-hot of `bins` equal-width bins over `[-1, 1]`; labels outside the
    /// interval fall into the end bins.
    Bins { bins: usize },
}

impl VFeatures {
    pub fn width(self) -> usize {
        match self {
            Self::Raw => 1,
            Self::Bins { bins } => bins,
        }
    }

    fn encode(self, ys: &[f64]) -> Array2<f64> {
        match self {
            Self::Raw => Array2::from_shape_vec((ys.len(), 1), ys.to_vec()).expect("column"),
            Self::Bins { bins } => {
                let mut out = Array2::zeros((ys.len(), bins));
                for (i, &y) in ys.iter().enumerate() {
                    out[[i, label_bin(y, bins)]] = 1.0;
                }
                out
            }
        }
    }
}

/// Equal-width bin of `y` over `[-1, 1]`, clamped to the end bins.
pub fn label_bin(y: f64, bins: usize) -> usize {
    let b = ((y + 1.0) / 2.0 * bins as f64).floor();
    (b.max(0.0) as usize).min(bins - 1)
}

/// Label factor `V(y) = exp(net(features(y)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VModel {
    pub net: Mlp,
    pub features: VFeatures,
}

pub struct VForward {
    tape: Tape,
    pub values: Vec<f64>,
}

impl VModel {
    pub fn init(features: VFeatures, hidden: &[usize], rng: &mut StreamRng) -> Result<Self> {
        if let VFeatures::Bins { bins } = features {
            if bins < 1 {
                return Err(Error::Config("label factor needs at least one bin".into()));
            }
        }
        Ok(Self {
            net: Mlp::init(MlpSpec::new(features.width(), hidden, 1, Activation::Tanh), rng)?,
            features,
        })
    }

    pub fn forward(&self, ys: &[f64]) -> Result<VForward> {
        let tape = self.net.forward_tape(self.features.encode(ys).view())?;
        let values = tape.output().iter().map(|r| r.exp()).collect();
        Ok(VForward { tape, values })
    }

    pub fn eval(&self, ys: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(ys)?.values)
    }

    pub fn backward(&self, fwd: &VForward, d_values: &[f64]) -> Result<Vec<f64>> {
        let upstream: Vec<f64> = d_values.iter().zip(&fwd.values).map(|(d, v)| d * v).collect();
        let up = ArrayView2::from_shape((upstream.len(), 1), &upstream).expect("column");
        Ok(self.net.backward_tape(&fwd.tape, up)?.params)
    }

    fn output_bias_index(&self) -> usize {
        self.net.spec.layout().last().expect("at least one layer").bias.start
    }

    /// Multiplies `V` by `factor` through the output bias.
    pub fn rescale(&mut self, factor: f64) {
        let i = self.output_bias_index();
        self.net.params[i] += factor.ln();
    }
}

fn column(xs: &[f64]) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((xs.len(), 1), xs).expect("column")
}
