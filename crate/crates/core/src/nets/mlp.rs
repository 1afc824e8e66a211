use std::fs;
use std::ops::Range;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Self::Tanh => v.tanh(),
            Self::Relu => v.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Self::Tanh => 1.0 - out * out,
            Self::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

/// Where one affine layer lives in the flat parameter vector. Weights are
/// stored row-major as `fan_in x fan_out`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Range<usize>,
    pub bias: Range<usize>,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: &[usize], output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            hidden: hidden.to_vec(),
            output_dim,
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config(format!("network dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn layout(&self) -> Vec<LayerLayout> {
        let dims: Vec<usize> = std::iter::once(self.input_dim)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(self.output_dim))
            .collect();
        let mut offset = 0;
        dims.windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weights = offset..offset + fan_in * fan_out;
                let bias = weights.end..weights.end + fan_out;
                offset = bias.end;
                LayerLayout {
                    fan_in,
                    fan_out,
                    weights,
                    bias,
                }
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layout().last().map_or(0, |l| l.bias.end)
    }
}

/// Feed-forward network: affine layers with the activation between them and
/// a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
}

/// Per-layer inputs recorded by a forward pass; `inputs[0]` is the batch.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }
}

/// Gradient of a loss that is a plain sum over the batch rows.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Array2<f64>,
}

impl Mlp {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialisation of weights and biases.
    pub fn init(spec: MlpSpec, rng: &mut StreamRng) -> Result<Self> {
        spec.validate()?;
        let mut params = vec![0.0; spec.param_count()];
        for layer in spec.layout() {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            for p in &mut params[layer.weights.start..layer.bias.end] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::DimensionMismatch {
                expected: spec.param_count(),
                got: params.len(),
            });
        }
        Ok(Self { spec, params })
    }

    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        let n = spec.param_count();
        Self::from_params(spec, vec![0.0; n])
    }

    fn weights(&self, layer: &LayerLayout) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((layer.fan_in, layer.fan_out), &self.params[layer.weights.clone()])
            .expect("layout matches parameter length")
    }

    fn bias(&self, layer: &LayerLayout) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[layer.bias.clone()])
    }

    fn check_input(&self, input: &ArrayView2<f64>) -> Result<()> {
        if input.ncols() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                got: input.ncols(),
            });
        }
        Ok(())
    }

    /// Batched forward pass keeping what the backward pass needs.
    pub fn forward_tape(&self, input: ArrayView2<f64>) -> Result<Tape> {
        self.check_input(&input)?;
        let layout = self.spec.layout();
        let mut inputs = Vec::with_capacity(layout.len());
        let mut h = input.to_owned();
        for (i, layer) in layout.iter().enumerate() {
            let mut z = h.dot(&self.weights(layer));
            z += &self.bias(layer);
            inputs.push(h);
            if i + 1 < layout.len() {
                let act = self.spec.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            h = z;
        }
        Ok(Tape { inputs, output: h })
    }

    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_tape(input)?.output)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Convenience for scalar-input networks.
    pub fn forward_scalars(&self, xs: &[f64]) -> Result<Array2<f64>> {
        let view = ArrayView2::from_shape((xs.len(), 1), xs).expect("column vector");
        self.forward_batch(view)
    }

    /// Reverse pass for a loss whose gradient at the outputs is `upstream`
    /// (already including any batch averaging).
    pub fn backward_tape(&self, tape: &Tape, upstream: ArrayView2<f64>) -> Result<Gradients> {
        if upstream.dim() != tape.output.dim() {
            return Err(Error::DimensionMismatch {
                expected: tape.output.len(),
                got: upstream.len(),
            });
        }
        let layout = self.spec.layout();
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = upstream.to_owned();
        for (i, layer) in layout.iter().enumerate().rev() {
            let input = &tape.inputs[i];
            let dw = input.t().dot(&delta);
            grads[layer.weights.clone()]
                .iter_mut()
                .zip(dw.iter())
                .for_each(|(g, d)| *g = *d);
            let db: Array1<f64> = delta.sum_axis(Axis(0));
            grads[layer.bias.clone()].copy_from_slice(db.as_slice().expect("contiguous"));
            let mut back = delta.dot(&self.weights(layer).t());
            if i > 0 {
                let act = self.spec.activation;
                back.zip_mut_with(input, |g, &out| *g *= act.derivative_from_output(out));
            }
            delta = back;
        }
        Ok(Gradients {
            params: grads,
            input: delta,
        })
    }

    /// Gradient of the batch-mean loss, given per-row gradients of the
    /// per-sample losses at the outputs.
    pub fn backward(&self, input: ArrayView2<f64>, per_sample_grad: ArrayView2<f64>) -> Result<Vec<f64>> {
        let tape = self.forward_tape(input)?;
        let scale = 1.0 / tape.batch_size().max(1) as f64;
        let upstream = per_sample_grad.mapv(|g| g * scale);
        Ok(self.backward_tape(&tape, upstream.view())?.params)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let raw: Mlp = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::from_params(raw.spec, raw.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    fn spec() -> MlpSpec {
        MlpSpec::new(2, &[5, 4], 3, Activation::Tanh)
    }

    #[test]
    fn layout_is_contiguous() {
        let s = spec();
        let l = s.layout();
        assert_eq!(l.len(), 3);
        assert_eq!(l[0].weights, 0..10);
        assert_eq!(l[2].bias.end, s.param_count());
        assert_eq!(s.param_count(), 2 * 5 + 5 + 5 * 4 + 4 + 4 * 3 + 3);
    }

    #[test]
    fn affine_identity() {
        let m = Mlp::from_params(MlpSpec::new(1, &[], 1, Activation::Tanh), vec![1.0, 0.0]).unwrap();
        assert_eq!(m.forward(&[0.3]).unwrap(), vec![0.3]);
    }

    #[test]
    fn zero_params_give_zero_output() {
        for act in [Activation::Tanh, Activation::Relu] {
            let m = Mlp::zeros(MlpSpec::new(2, &[4], 2, act)).unwrap();
            assert_eq!(m.forward(&[0.7, -3.0]).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let m = Mlp::init(spec(), &mut rng::seeded(1)).unwrap();
        assert_eq!(m.forward(&[0.1, 0.2]).unwrap(), m.forward(&[0.1, 0.2]).unwrap());
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let m = Mlp::init(spec(), &mut rng::seeded(1)).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
        assert!(Mlp::from_params(spec(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let m = Mlp::init(spec(), &mut rng::seeded(2)).unwrap();
        let g = m.backward(array![[0.3, -0.2]].view(), Array2::zeros((1, 3)).view()).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn batch_gradient_is_mean_of_singles() {
        let m = Mlp::init(MlpSpec::new(2, &[6], 2, Activation::Relu), &mut rng::seeded(3)).unwrap();
        let x = array![[0.3, -0.2], [-0.9, 0.4]];
        let up = array![[1.0, -0.5], [0.25, 2.0]];
        let both = m.backward(x.view(), up.view()).unwrap();
        let a = m.backward(x.slice(ndarray::s![0..1, ..]), up.slice(ndarray::s![0..1, ..])).unwrap();
        let b = m.backward(x.slice(ndarray::s![1..2, ..]), up.slice(ndarray::s![1..2, ..])).unwrap();
        for i in 0..both.len() {
            assert!((both[i] - 0.5 * (a[i] + b[i])).abs() <= 1e-12);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = Mlp::init(spec(), &mut rng::seeded(4)).unwrap();
        m.save_json(&path).unwrap();
        assert_eq!(Mlp::load_json(&path).unwrap(), m);
    }
}
