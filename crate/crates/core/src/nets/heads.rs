use serde::{Deserialize, Serialize};

/// `ln sqrt(2 pi)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrediction {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianPrediction {
    pub fn new(mu: f64, sigma: f64) -> Self {
        debug_assert!(sigma > 0.0, "sigma must be positive");
        Self { mu, sigma }
    }

    /// From the raw network outputs `(mu, log sigma)`.
    pub fn from_raw(mu: f64, log_sigma: f64) -> Self {
        Self {
            mu,
            sigma: log_sigma.exp(),
        }
    }

    pub fn nll(&self, y: f64) -> f64 {
        gaussian_nll(self.mu, self.sigma.ln(), y).loss
    }
}

/// Anything producing a Gaussian prediction at a scalar input.
pub trait Predictor {
    fn predict(&self, x: f64) -> GaussianPrediction;

    fn predict_batch(&self, xs: &[f64]) -> Vec<GaussianPrediction> {
        xs.iter().map(|&x| self.predict(x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNll {
    pub loss: f64,
    pub d_mu: f64,
    pub d_log_sigma: f64,
}

/// `(y - mu)^2 / (2 sigma^2) + ln(sqrt(2 pi) sigma)` with `sigma = exp(log_sigma)`.
pub fn gaussian_nll(mu: f64, log_sigma: f64, y: f64) -> GaussianNll {
    let inv_var = (-2.0 * log_sigma).exp();
    let r = y - mu;
    let z2 = r * r * inv_var;
    GaussianNll {
        loss: 0.5 * z2 + LN_SQRT_2PI + log_sigma,
        d_mu: -r * inv_var,
        d_log_sigma: 1.0 - z2,
    }
}

/// Numerically stable softmax of one row of logits.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Pulls a gradient at the probabilities back to the logits.
pub fn softmax_backward(probs: &[f64], grad_probs: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(grad_probs).map(|(p, g)| p * g).sum();
    probs.iter().zip(grad_probs).map(|(p, g)| p * (g - dot)).collect()
}

/// Positive-scalar head `exp(raw)`; its derivative is the value itself.
pub fn exp_head(raw: f64) -> f64 {
    raw.exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nll_reference_values() {
        assert!((gaussian_nll(0.4, 0.0, 0.4).loss - LN_SQRT_2PI).abs() < 1e-15);
        let ls = (1.0 / 3f64.sqrt()).ln();
        assert!((gaussian_nll(0.0, ls, 0.0).loss - 0.369_632_388_870_617_8).abs() < 1e-12);
        assert!((LN_SQRT_2PI - (2.0 * std::f64::consts::PI).sqrt().ln()).abs() < 1e-15);
    }

    #[test]
    fn nll_gradients_match_differences() {
        let h = 1e-6;
        for &(mu, ls, y) in &[(0.1, -0.3, 0.7), (-0.5, 0.4, 0.2), (0.0, -1.5, -0.9)] {
            let g = gaussian_nll(mu, ls, y);
            let dmu = (gaussian_nll(mu + h, ls, y).loss - gaussian_nll(mu - h, ls, y).loss) / (2.0 * h);
            let dls = (gaussian_nll(mu, ls + h, y).loss - gaussian_nll(mu, ls - h, y).loss) / (2.0 * h);
            assert!((g.d_mu - dmu).abs() <= 1e-6 * dmu.abs().max(1.0));
            assert!((g.d_log_sigma - dls).abs() <= 1e-6 * dls.abs().max(1.0));
        }
    }

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[1000.0, -3.0, 2.5, 0.0]);
        assert!(p.iter().all(|v| *v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let q = softmax(&[0.1, 0.2, -0.4]);
        assert!(q.iter().all(|v| *v > 0.0));
        assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn softmax_backward_matches_differences() {
        let logits = [0.3, -0.7, 1.1];
        let c = [0.5, -2.0, 1.5];
        let f = |l: &[f64]| softmax(l).iter().zip(&c).map(|(p, c)| p * c).sum::<f64>();
        let g = softmax_backward(&softmax(&logits), &c);
        for j in 0..3 {
            let mut up = logits;
            let mut down = logits;
            up[j] += 1e-6;
            down[j] -= 1e-6;
            let num = (f(&up) - f(&down)) / 2e-6;
            assert!((g[j] - num).abs() < 1e-8);
        }
    }
}
