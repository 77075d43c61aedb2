use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, gemm, Matrix};
use super::params::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
    /// `tanh`, squashing into (-1, 1).
    Bounded,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::None => z,
            Activation::Relu => z.max(0.0),
            Activation::Bounded => z.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::None => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Bounded => 1.0 - y * y,
        }
    }
}

/// Affine layer, `weights` is `out_dim x in_dim` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Weights uniform in `±1/sqrt(in_dim)`, zero bias.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut layer = Self::zeros(in_dim, out_dim);
        for w in &mut layer.weights {
            *w = rng.random_range(-bound..=bound);
        }
        layer
    }

}

/// Multi-layer perceptron with rectified hidden layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
    pub output_activation: Activation,
}

/// Per-layer activations from a forward pass; `values[0]` is the input.
#[derive(Debug, Clone)]
pub struct DenseTrace {
    pub values: Vec<Matrix>,
}

impl DenseTrace {
    pub fn output(&self) -> &Matrix {
        self.values.last().expect("trace holds the input at least")
    }
}

impl DenseNet {
    /// `widths` lists every layer boundary, input first.
    pub fn init(widths: &[usize], output_activation: Activation, rng: &mut impl Rng) -> Self {
        assert!(widths.len() >= 2, "a dense net needs an input and an output width");
        Self {
            layers: widths.windows(2).map(|w| Layer::init(w[0], w[1], rng)).collect(),
            output_activation,
        }
    }

    pub fn zeros(widths: &[usize], output_activation: Activation) -> Self {
        assert!(widths.len() >= 2, "a dense net needs an input and an output width");
        Self {
            layers: widths.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            output_activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.in_dim()];
        w.extend(self.layers.iter().map(|l| l.out_dim));
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Shape("dense net without layers".into()));
        }
        for (k, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::Shape(format!("layer {k} tensor sizes do not match its dims")));
            }
            if k > 0 && self.layers[k - 1].out_dim != l.in_dim {
                return Err(Error::Shape(format!("layer {k} input does not chain")));
            }
        }
        if self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::Shape("non-finite parameter".into()));
        }
        Ok(())
    }

    fn activation(&self, k: usize) -> Activation {
        if k + 1 == self.layers.len() {
            self.output_activation
        } else {
            Activation::Relu
        }
    }

    pub fn forward(&self, x: Matrix) -> Result<DenseTrace> {
        if x.cols != self.in_dim() {
            return Err(Error::Shape(format!(
                "dense input width {} but net expects {}",
                x.cols,
                self.in_dim()
            )));
        }
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x);
        for (k, layer) in self.layers.iter().enumerate() {
            let act = self.activation(k);
            let input = values.last().unwrap();
            let mut data = Vec::with_capacity(input.rows * layer.out_dim);
            for _ in 0..input.rows {
                data.extend_from_slice(&layer.bias);
            }
            let mut out = Matrix::from_vec(input.rows, layer.out_dim, data)?;
            // out += input * W^T
            gemm(
                (input.rows, layer.in_dim, layer.out_dim),
                (&input.data, layer.in_dim, 1),
                (&layer.weights, 1, layer.in_dim),
                1.0,
                (&mut out.data, layer.out_dim),
            );
            if act != Activation::None {
                for y in &mut out.data {
                    *y = act.apply(*y);
                }
            }
            values.push(out);
        }
        Ok(DenseTrace { values })
    }

    /// Reverse pass. Adds parameter gradients into `grads` and returns the
    /// gradient with respect to the input.
    pub fn backward(&self, trace: &DenseTrace, grad_output: &Matrix, grads: &mut DenseNet) -> Matrix {
        self.backward_impl(trace, grad_output, grads, true)
    }

    /// Like [`DenseNet::backward`] but skips the input gradient.
    pub fn accumulate_grads(&self, trace: &DenseTrace, grad_output: &Matrix, grads: &mut DenseNet) {
        self.backward_impl(trace, grad_output, grads, false);
    }

    fn backward_impl(&self, trace: &DenseTrace, grad_output: &Matrix, grads: &mut DenseNet, need_input: bool) -> Matrix {
        let mut upstream = grad_output.clone();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let act = self.activation(k);
            let out = &trace.values[k + 1];
            let input = &trace.values[k];
            for (g, &y) in upstream.data.iter_mut().zip(&out.data) {
                *g *= act.derivative_from_output(y);
            }
            let gl = &mut grads.layers[k];
            let rows = input.rows;
            for r in 0..rows {
                axpy(1.0, upstream.row(r), &mut gl.bias);
            }
            // dW += dZ^T * input
            gemm(
                (layer.out_dim, rows, layer.in_dim),
                (&upstream.data, 1, layer.out_dim),
                (&input.data, layer.in_dim, 1),
                1.0,
                (&mut gl.weights, layer.in_dim),
            );
            let propagate = k > 0 || need_input;
            let mut down = Matrix::zeros(if propagate { rows } else { 0 }, layer.in_dim);
            if propagate {
                // dX = dZ * W
                gemm(
                    (rows, layer.out_dim, layer.in_dim),
                    (&upstream.data, layer.out_dim, 1),
                    (&layer.weights, layer.in_dim, 1),
                    1.0,
                    (&mut down.data, layer.in_dim),
                );
            }
            upstream = down;
        }
        upstream
    }
}

impl ParamSet for DenseNet {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_gives_zero() {
        let net = DenseNet::zeros(&[3, 4, 2], Activation::None);
        let t = net.forward(Matrix::row_vector(vec![1.0, -2.0, 3.0])).unwrap();
        assert_eq!(t.output().data, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer() {
        let mut net = DenseNet::zeros(&[3, 3], Activation::None);
        for i in 0..3 {
            net.layers[0].weights[i * 3 + i] = 1.0;
        }
        let x = vec![0.5, -1.5, 2.0];
        let t = net.forward(Matrix::row_vector(x.clone())).unwrap();
        assert_eq!(t.output().data, x);
    }

    #[test]
    fn width_mismatch_is_shape_error() {
        let net = DenseNet::zeros(&[3, 2], Activation::None);
        assert!(matches!(net.forward(Matrix::row_vector(vec![1.0])), Err(Error::Shape(_))));
    }

    #[test]
    fn linear_weight_gradient_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNet::init(&[3, 2], Activation::None, &mut rng);
        let x = vec![0.3, -0.7, 1.1];
        let t = net.forward(Matrix::row_vector(x.clone())).unwrap();
        let g = vec![2.0, -0.5];
        let mut grads = DenseNet::zeros(&[3, 2], Activation::None);
        net.backward(&t, &Matrix::row_vector(g.clone()), &mut grads);
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(grads.layers[0].weights[o * 3 + i], g[o] * x[i]);
            }
        }
    }

    #[test]
    fn relu_blocks_negative_units() {
        let mut net = DenseNet::zeros(&[1, 1, 1], Activation::None);
        net.layers[0].weights[0] = 1.0;
        net.layers[0].bias[0] = -5.0;
        net.layers[1].weights[0] = 1.0;
        let t = net.forward(Matrix::row_vector(vec![1.0])).unwrap();
        let mut grads = DenseNet::zeros(&[1, 1, 1], Activation::None);
        let dx = net.backward(&t, &Matrix::row_vector(vec![1.0]), &mut grads);
        assert_eq!(dx.data, vec![0.0]);
        assert_eq!(grads.layers[0].weights[0], 0.0);
    }
}
