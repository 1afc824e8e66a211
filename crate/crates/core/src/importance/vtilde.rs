use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::Predictor;
use crate::rng::StreamRng;

/// How `E_{y ~ D_S(y|x)} V(y)` is approximated under the fitted Gaussian conditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VTildeMethod {
    /// Deterministic Gauss-Hermite quadrature.
    GaussHermite { nodes: usize },
    /// Reparameterised samples `mu + sigma z`, redrawn for every batch.
    MonteCarlo { samples: usize },
}

impl Default for VTildeMethod {
    fn default() -> Self {
        Self::GaussHermite { nodes: 16 }
    }
}

impl VTildeMethod {
    pub fn points(self) -> usize {
        match self {
            Self::GaussHermite { nodes } => nodes,
            Self::MonteCarlo { samples } => samples,
        }
    }
}

/// Nodes and weights of the probabilists' Gauss-Hermite rule, so that
/// `sum_m w_m f(z_m)` approximates `E f(Z)` for standard normal `Z`.
/// Golub-Welsch: the nodes are the eigenvalues of the Jacobi matrix of the
/// Hermite recurrence, the weights the squared first eigenvector components.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(z, w)| (z, w / total)).unzip()
}

/// Label nodes `y_{i,m}` and shared weights approximating the source conditional at each `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelNodes {
    pub ys: Array2<f64>,
    pub weights: Vec<f64>,
}

impl LabelNodes {
    /// A single observed label per row.
    pub fn observed(ys: &[f64]) -> Self {
        Self {
            ys: Array2::from_shape_vec((ys.len(), 1), ys.to_vec()).expect("column"),
            weights: vec![1.0],
        }
    }
}

/// Source-conditional moments at a fixed set of inputs, with the quadrature rule.
#[derive(Debug, Clone)]
pub struct VTildeEstimator {
    method: VTildeMethod,
    std_nodes: Vec<f64>,
    std_weights: Vec<f64>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl VTildeEstimator {
    pub fn new(method: VTildeMethod, conditional: &dyn Predictor, xs: &[f64]) -> Result<Self> {
        if method.points() == 0 {
            return Err(Error::Config("the label expectation needs at least one point".into()));
        }
        let (std_nodes, std_weights) = match method {
            VTildeMethod::GaussHermite { nodes } => gauss_hermite(nodes),
            VTildeMethod::MonteCarlo { samples } => (vec![], vec![1.0 / samples as f64; samples]),
        };
        let preds = conditional.predict_batch(xs);
        Ok(Self {
            method,
            std_nodes,
            std_weights,
            mu: preds.iter().map(|p| p.mu).collect(),
            sigma: preds.iter().map(|p| p.sigma).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Nodes for the inputs at `rows`; Monte Carlo draws from `rng`.
    pub fn nodes(&self, rows: &[usize], rng: &mut StreamRng) -> LabelNodes {
        let m = self.method.points();
        let ys = Array2::from_shape_fn((rows.len(), m), |(r, j)| {
            let i = rows[r];
            let z = match self.method {
                VTildeMethod::GaussHermite { .. } => self.std_nodes[j],
                VTildeMethod::MonteCarlo { .. } => StandardNormal.sample(rng),
            };
            self.mu[i] + self.sigma[i] * z
        });
        LabelNodes {
            ys,
            weights: self.std_weights.clone(),
        }
    }

    pub fn all_nodes(&self, rng: &mut StreamRng) -> LabelNodes {
        let rows: Vec<usize> = (0..self.len()).collect();
        self.nodes(&rows, rng)
    }
}
