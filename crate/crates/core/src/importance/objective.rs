use serde::{Deserialize, Serialize};

use super::models::{UModel, VModel};
use super::vtilde::LabelNodes;
use crate::error::{Error, Result};

/// Lower bound applied to `U V` inside the target term's reciprocal.
pub const RECIPROCAL_FLOOR: f64 = 1e-12;

/// Inputs with per-sample probability mass and label nodes; an observed label
/// is a single node of weight one.
#[derive(Debug, Clone)]
pub struct ObjectiveBatch {
    pub xs: Vec<f64>,
    pub mass: Vec<f64>,
    pub labels: LabelNodes,
}

impl ObjectiveBatch {
    pub fn labeled(xs: &[f64], ys: &[f64]) -> Result<Self> {
        Self::weighted(xs, ys, &vec![1.0; xs.len()])
    }

    /// Labeled batch whose samples carry the given (unnormalised) masses.
    pub fn weighted(xs: &[f64], ys: &[f64], mass: &[f64]) -> Result<Self> {
        if ys.len() != xs.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        Self::build(xs, mass, LabelNodes::observed(ys))
    }

    /// Unlabeled batch whose label expectation is taken over `nodes`.
    pub fn unlabeled(xs: &[f64], nodes: LabelNodes) -> Result<Self> {
        Self::build(xs, &vec![1.0; xs.len()], nodes)
    }

    fn build(xs: &[f64], mass: &[f64], labels: LabelNodes) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Config("objective batches must be non-empty".into()));
        }
        if mass.len() != xs.len() || labels.ys.nrows() != xs.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: mass.len().min(labels.ys.nrows()),
            });
        }
        let total: f64 = mass.iter().sum();
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) || total.is_nan() || total <= 0.0 {
            return Err(Error::InvalidDistribution("batch masses must be nonnegative with positive sum".into()));
        }
        Ok(Self {
            xs: xs.to_vec(),
            mass: mass.iter().map(|m| m / total).collect(),
            labels,
        })
    }

    fn is_labeled(&self) -> bool {
        self.labels.weights.len() == 1
    }
}

/// Gradient split by parameter group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorGradient {
    pub classifier: Vec<f64>,
    pub log_scores: Vec<f64>,
    pub v_net: Vec<f64>,
}

impl FactorGradient {
    fn zeros(u: &UModel, v: &VModel) -> Self {
        Self {
            classifier: vec![0.0; u.classifier.params.len()],
            log_scores: vec![0.0; u.k()],
            v_net: vec![0.0; v.net.params.len()],
        }
    }

    fn add(&mut self, (classifier, log_scores, v_net): (Vec<f64>, Vec<f64>, Vec<f64>)) {
        for (a, b) in [
            (&mut self.classifier, classifier),
            (&mut self.log_scores, log_scores),
            (&mut self.v_net, v_net),
        ] {
            a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.classifier
            .iter()
            .chain(&self.log_scores)
            .chain(&self.v_net)
            .all(|g| g.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct ObjectiveValue {
    pub loss: f64,
    pub grad: FactorGradient,
}

#[derive(Clone, Copy)]
enum Side {
    Source,
    Target,
}

/// `U(x_i) * sum_m a_m V(y_im)` for each row of the batch.
pub fn batch_products(u: &UModel, v: &VModel, batch: &ObjectiveBatch) -> Result<Vec<f64>> {
    let uv = u.eval(&batch.xs)?;
    let flat: Vec<f64> = batch.labels.ys.iter().copied().collect();
    let vv = v.eval(&flat)?;
    let m = batch.labels.weights.len();
    Ok(uv
        .iter()
        .enumerate()
        .map(|(i, ui)| ui * (0..m).map(|j| batch.labels.weights[j] * vv[i * m + j]).sum::<f64>())
        .collect())
}

/// Gradients of one side's term: classifier, log scores, `V` network.
type SideGrads = (Vec<f64>, Vec<f64>, Vec<f64>);

fn side_term(u: &UModel, v: &VModel, batch: &ObjectiveBatch, side: Side) -> Result<(f64, SideGrads)> {
    let uf = u.forward(&batch.xs)?;
    let flat: Vec<f64> = batch.labels.ys.iter().copied().collect();
    let vf = v.forward(&flat)?;
    let m = batch.labels.weights.len();
    let a = &batch.labels.weights;

    let mut loss = 0.0;
    let mut d_u = vec![0.0; batch.xs.len()];
    let mut d_v = vec![0.0; flat.len()];
    for i in 0..batch.xs.len() {
        let ui = uf.values[i];
        let vt: f64 = (0..m).map(|j| a[j] * vf.values[i * m + j]).sum();
        let w = ui * vt;
        let mass = batch.mass[i];
        let d_w = match side {
            Side::Source => {
                loss += mass * w.ln_1p();
                mass / (1.0 + w)
            }
            Side::Target => {
                let wf = w.max(RECIPROCAL_FLOOR);
                loss += mass * (1.0 / wf).ln_1p();
                if w > RECIPROCAL_FLOOR {
                    -mass / (w * (1.0 + w))
                } else {
                    0.0
                }
            }
        };
        d_u[i] = d_w * vt;
        for j in 0..m {
            d_v[i * m + j] = d_w * ui * a[j];
        }
    }
    let (g_c, g_s) = u.backward(&uf, &d_u)?;
    let g_v = v.backward(&vf, &d_v)?;
    Ok((loss, (g_c, g_s, g_v)))
}

/// `E_source log(1 + U V) + E_target log(1 + 1 / (U V))` with exact
/// gradients, where `V` is averaged over each batch's label nodes.
pub fn joint_objective(
    u: &UModel,
    v: &VModel,
    source: &ObjectiveBatch,
    target: &ObjectiveBatch,
) -> Result<ObjectiveValue> {
    let (ls, gs) = side_term(u, v, source, Side::Source)?;
    let (lt, gt) = side_term(u, v, target, Side::Target)?;
    let loss = ls + lt;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { step: 0 });
    }
    let mut grad = FactorGradient::zeros(u, v);
    grad.add(gs);
    grad.add(gt);
    Ok(ObjectiveValue { loss, grad })
}

/// Supervised objective; both batches carry observed labels.
pub fn l_sup(u: &UModel, v: &VModel, source: &ObjectiveBatch, target: &ObjectiveBatch) -> Result<ObjectiveValue> {
    if !source.is_labeled() || !target.is_labeled() {
        return Err(Error::Config("the supervised objective needs observed labels on both sides".into()));
    }
    joint_objective(u, v, source, target)
}

/// Unsupervised objective; labels enter only through the source-conditional nodes.
pub fn l_unsup(u: &UModel, v: &VModel, source: &ObjectiveBatch, target: &ObjectiveBatch) -> Result<ObjectiveValue> {
    joint_objective(u, v, source, target)
}
