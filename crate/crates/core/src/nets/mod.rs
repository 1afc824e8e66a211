//! Small feed-forward networks with hand-written reverse-mode gradients.

mod heads;
mod mlp;
mod optim;

pub use heads::{
    exp_head, gaussian_nll, softmax, softmax_backward, GaussianNll, GaussianPrediction, Predictor, LN_SQRT_2PI,
};
pub use mlp::{Activation, Gradients, LayerLayout, Mlp, MlpSpec, Tape};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::Array2;
    use rand::Rng;

    /// A scalar loss on top of network outputs, returning the loss and its
    /// gradient at the outputs.
    type Head = dyn Fn(&Array2<f64>) -> (f64, Array2<f64>);

    fn loss_and_grad(net: &Mlp, x: &Array2<f64>, head: &Head) -> (f64, Vec<f64>) {
        let tape = net.forward_tape(x.view()).unwrap();
        let (loss, up) = head(tape.output());
        (loss, net.backward_tape(&tape, up.view()).unwrap().params)
    }

    fn finite_difference_check(net: &Mlp, x: &Array2<f64>, head: &Head, seed: u64) {
        let (_, grad) = loss_and_grad(net, x, head);
        let mut rng = rng::seeded(seed);
        let h = 1e-5;
        for _ in 0..100 {
            let i = rng.random_range(0..net.params.len());
            let mut plus = net.clone();
            plus.params[i] += h;
            let mut minus = net.clone();
            minus.params[i] -= h;
            let num = (loss_and_grad(&plus, x, head).0 - loss_and_grad(&minus, x, head).0) / (2.0 * h);
            let err = (grad[i] - num).abs();
            assert!(
                err <= 1e-4 * grad[i].abs().max(num.abs()) + 1e-9,
                "param {i}: analytic {} vs numeric {num}",
                grad[i]
            );
        }
    }

    fn batch(seed: u64, n: usize, d: usize) -> Array2<f64> {
        let mut rng = rng::seeded(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn gaussian_head_gradients() {
        for act in [Activation::Tanh, Activation::Relu] {
            let net = Mlp::init(MlpSpec::new(1, &[8, 8], 2, act), &mut rng::seeded(1)).unwrap();
            let x = batch(2, 16, 1);
            let ys = batch(3, 16, 1);
            let head = move |out: &Array2<f64>| {
                let n = out.nrows() as f64;
                let mut up = Array2::zeros(out.dim());
                let mut loss = 0.0;
                for r in 0..out.nrows() {
                    let g = gaussian_nll(out[[r, 0]], out[[r, 1]], ys[[r, 0]]);
                    loss += g.loss / n;
                    up[[r, 0]] = g.d_mu / n;
                    up[[r, 1]] = g.d_log_sigma / n;
                }
                (loss, up)
            };
            finite_difference_check(&net, &x, &head, 4);
        }
    }

    #[test]
    fn exp_head_gradients() {
        let net = Mlp::init(MlpSpec::new(2, &[6], 1, Activation::Tanh), &mut rng::seeded(5)).unwrap();
        let x = batch(6, 10, 2);
        let head = |out: &Array2<f64>| {
            let mut up = Array2::zeros(out.dim());
            let mut loss = 0.0;
            for r in 0..out.nrows() {
                let v = exp_head(out[[r, 0]]);
                loss += (1.0 + v).ln();
                up[[r, 0]] = v / (1.0 + v);
            }
            (loss, up)
        };
        finite_difference_check(&net, &x, &head, 7);
    }

    #[test]
    fn softmax_head_gradients() {
        let net = Mlp::init(MlpSpec::new(1, &[8], 4, Activation::Tanh), &mut rng::seeded(8)).unwrap();
        let x = batch(9, 12, 1);
        let weights = [0.3, -1.2, 2.0, 0.7];
        let head = move |out: &Array2<f64>| {
            let mut up = Array2::zeros(out.dim());
            let mut loss = 0.0;
            for r in 0..out.nrows() {
                let p = softmax(out.row(r).as_slice().unwrap());
                loss += p.iter().zip(&weights).map(|(p, w)| p * w).sum::<f64>();
                let g = softmax_backward(&p, &weights);
                up.row_mut(r).assign(&ndarray::Array1::from(g));
            }
            (loss, up)
        };
        finite_difference_check(&net, &x, &head, 10);
    }

    #[test]
    fn sgd_fits_identity_monotonically() {
        let mut net = Mlp::init(MlpSpec::new(1, &[64, 64], 1, Activation::Tanh), &mut rng::seeded(11)).unwrap();
        let xs: Vec<f64> = (0..32).map(|i| -1.0 + 2.0 * i as f64 / 31.0).collect();
        let x = Array2::from_shape_vec((32, 1), xs.clone()).unwrap();
        let mut opt = OptimizerState::new(OptimizerConfig::sgd(1e-2), net.params.len());
        let mse = move |out: &Array2<f64>| {
            let n = out.nrows() as f64;
            let mut up = Array2::zeros(out.dim());
            let mut loss = 0.0;
            for r in 0..out.nrows() {
                let e = out[[r, 0]] - xs[r];
                loss += 0.5 * e * e / n;
                up[[r, 0]] = e / n;
            }
            (loss, up)
        };
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            let (loss, grad) = loss_and_grad(&net, &x, &mse);
            assert!(loss < last, "{loss} >= {last}");
            last = loss;
            opt.step(&mut net.params, &grad).unwrap();
        }
    }
}
