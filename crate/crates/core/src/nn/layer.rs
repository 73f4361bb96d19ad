//! Dense layers and layer stacks.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::params::TensorRef;
use crate::error::{Error, Result};

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = glorot_limit(in_dim, out_dim);
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let layer = Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::config("dense layer with a zero dimension"));
        }
        if self.weights.len() != self.in_dim * self.out_dim || self.bias.len() != self.out_dim {
            return Err(Error::config(format!(
                "dense layer {}x{} holds {} weights and {} biases",
                self.out_dim,
                self.in_dim,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::config("dense layer holds non-finite parameters"));
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// `out = activation(W·input + b)`.
    pub fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) -> Result<()> {
        if input.len() != self.in_dim {
            return Err(Error::config(format!(
                "layer expects input of dim {}, got {}",
                self.in_dim,
                input.len()
            )));
        }
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.in_dim)
                .zip(&self.bias)
                .map(|(row, b)| self.activation.apply(dot(row, input) + b)),
        );
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.out_dim);
        self.forward_into(input, &mut out)?;
        Ok(out)
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to `input` when `want_input_grad` is set.
    ///
    /// `output` must be the value produced by `forward` on `input`.
    pub fn backward(
        &self,
        input: &[f64],
        output: &[f64],
        grad_output: &[f64],
        grads: &mut DenseLayer,
        want_input_grad: bool,
    ) -> Vec<f64> {
        debug_assert_eq!(output.len(), self.out_dim);
        debug_assert_eq!(grad_output.len(), self.out_dim);
        let mut grad_input = if want_input_grad {
            vec![0.0; self.in_dim]
        } else {
            Vec::new()
        };
        for j in 0..self.out_dim {
            let delta = grad_output[j] * self.activation.derivative_from_output(output[j]);
            if delta == 0.0 {
                continue;
            }
            grads.bias[j] += delta;
            let row = j * self.in_dim..(j + 1) * self.in_dim;
            for (g, &x) in grads.weights[row.clone()].iter_mut().zip(input) {
                *g += delta * x;
            }
            if want_input_grad {
                for (gi, &w) in grad_input.iter_mut().zip(&self.weights[row]) {
                    *gi += delta * w;
                }
            }
        }
        grad_input
    }

    pub(crate) fn push_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        out.push(TensorRef {
            name: format!("{prefix}.weight"),
            data: &self.weights,
        });
        out.push(TensorRef {
            name: format!("{prefix}.bias"),
            data: &self.bias,
        });
    }

    pub(crate) fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(&mut self.weights);
        out.push(&mut self.bias);
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An ordered chain of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpStack {
    layers: Vec<DenseLayer>,
}

impl MlpStack {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let stack = Self { layers };
        stack.validate()?;
        Ok(stack)
    }

    /// Builds a stack of Glorot-initialized layers `in_dim -> dims[0] -> ... -> dims[n-1]`.
    /// Every layer uses `hidden`, except the last which uses `last`.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        dims: &[usize],
        hidden: Activation,
        last: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        Self::new(Self::layer_chain(in_dim, dims, hidden, last, |i, o, a| {
            DenseLayer::glorot(i, o, a, rng)
        }))
    }

    pub fn zeros(in_dim: usize, dims: &[usize], hidden: Activation, last: Activation) -> Result<Self> {
        Self::new(Self::layer_chain(in_dim, dims, hidden, last, DenseLayer::zeros))
    }

    fn layer_chain(
        in_dim: usize,
        dims: &[usize],
        hidden: Activation,
        last: Activation,
        mut make: impl FnMut(usize, usize, Activation) -> DenseLayer,
    ) -> Vec<DenseLayer> {
        let mut prev = in_dim;
        dims.iter()
            .enumerate()
            .map(|(i, &d)| {
                let act = if i + 1 == dims.len() { last } else { hidden };
                let layer = make(prev, d, act);
                prev = d;
                layer
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("empty layer stack"));
        }
        for layer in &self.layers {
            layer.validate()?;
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::config(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Output of every layer in order; the last entry is the stack output.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = acts.last().map_or(input, Vec::as_slice);
            let y = layer.forward(x)?;
            acts.push(y);
        }
        Ok(acts)
    }

    /// Backpropagates `grad_output` (gradient w.r.t. the stack output) through
    /// every layer, accumulating into `grads`, and returns the gradient w.r.t.
    /// `input`. `acts` must come from `forward(input)`.
    pub fn backward(
        &self,
        input: &[f64],
        acts: &[Vec<f64>],
        grad_output: &[f64],
        grads: &mut MlpStack,
    ) -> Vec<f64> {
        let mut grad = grad_output.to_vec();
        for i in (0..self.layers.len()).rev() {
            let x = if i == 0 { input } else { &acts[i - 1] };
            grad = self.layers[i].backward(x, &acts[i], &grad, &mut grads.layers[i], true);
        }
        grad
    }

    pub(crate) fn push_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        for (i, layer) in self.layers.iter().enumerate() {
            layer.push_tensors(&format!("{prefix}.{i}"), out);
        }
    }

    pub(crate) fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        for layer in &mut self.layers {
            layer.push_tensors_mut(out);
        }
    }

    /// Pattern of positive ReLU units, folded into `hash`.
    pub(crate) fn fold_relu_pattern(&self, acts: &[Vec<f64>], hash: &mut u64) {
        for (layer, a) in self.layers.iter().zip(acts) {
            if layer.activation().is_piecewise_linear() {
                fold_signs(a, hash);
            }
        }
    }
}

pub(crate) fn fold_signs(values: &[f64], hash: &mut u64) {
    for &v in values {
        *hash = crate::seed::mix64(*hash ^ u64::from(v > 0.0));
    }
}

impl super::ParamSet for MlpStack {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        self.push_tensors("stack", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        self.push_tensors_mut(&mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_relu_layer() {
        let layer = DenseLayer::from_parts(
            2,
            2,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0],
            Activation::Relu,
        )
        .unwrap();
        let stack = MlpStack::new(vec![layer]).unwrap();
        let acts = stack.forward(&[1.0, -1.0]).unwrap();
        assert_eq!(acts.last().unwrap(), &vec![1.0, 0.0]);
    }

    #[test]
    fn zero_sigmoid_stack_outputs_half() {
        let stack = MlpStack::zeros(5, &[4, 3, 2], Activation::Relu, Activation::Sigmoid).unwrap();
        let acts = stack.forward(&[0.3, -2.0, 1.0, 4.0, 0.0]).unwrap();
        assert_eq!(acts.len(), 3);
        assert_eq!(acts[2], vec![0.5, 0.5]);
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        let stack = MlpStack::zeros(3, &[2], Activation::Relu, Activation::Identity).unwrap();
        assert!(matches!(stack.forward(&[1.0, 2.0]), Err(Error::Config(_))));
        let a = DenseLayer::zeros(3, 4, Activation::Relu);
        let b = DenseLayer::zeros(5, 1, Activation::Relu);
        assert!(MlpStack::new(vec![a, b]).is_err());
        assert!(DenseLayer::from_parts(2, 2, vec![0.0; 3], vec![0.0; 2], Activation::Relu).is_err());
        assert!(
            DenseLayer::from_parts(1, 1, vec![f64::NAN], vec![0.0], Activation::Relu).is_err()
        );
    }

    /// Straight-line recomputation with explicit index arithmetic.
    fn oracle_forward(stack: &MlpStack, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        for layer in stack.layers() {
            let mut y = vec![0.0; layer.out_dim()];
            for (j, yj) in y.iter_mut().enumerate() {
                let mut z = layer.bias()[j];
                for k in 0..layer.in_dim() {
                    z += layer.weights()[j * layer.in_dim() + k] * x[k];
                }
                *yj = match layer.activation() {
                    Activation::Relu => {
                        if z > 0.0 {
                            z
                        } else {
                            0.0
                        }
                    }
                    Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                    Activation::Identity => z,
                    Activation::TwoSigmoid => 2.0 / (1.0 + (-z).exp()),
                };
            }
            x = y;
        }
        x
    }

    #[test]
    fn seeded_stack_matches_straight_line_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let stack =
            MlpStack::glorot(6, &[8, 5, 3], Activation::Relu, Activation::Sigmoid, &mut rng).unwrap();
        let input = [0.5, -1.25, 2.0, 0.0, 0.75, -0.1];
        let got = stack.forward(&input).unwrap().pop().unwrap();
        let want = oracle_forward(&stack, &input);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-14 * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn squared_loss_gradient_of_single_weight() {
        // L = 0.5 (w x - y)^2 with x = 2, y = 0, w = 1  =>  dL/dw = (w x - y) x = 4
        let layer =
            DenseLayer::from_parts(1, 1, vec![1.0], vec![0.0], Activation::Identity).unwrap();
        let stack = MlpStack::new(vec![layer]).unwrap();
        let x = [2.0];
        let acts = stack.forward(&x).unwrap();
        let residual = acts[0][0] - 0.0;
        let mut grads = crate::nn::zeroed(&stack);
        stack.backward(&x, &acts, &[residual], &mut grads);
        assert_eq!(grads.layers()[0].weights()[0], 4.0);
    }

    #[test]
    fn bce_bias_gradient_of_zero_sigmoid_head() {
        // dBCE/dz = p - y = 0.5 - 1 at p = sigmoid(0)
        let stack = MlpStack::zeros(3, &[1], Activation::Relu, Activation::Sigmoid).unwrap();
        let x = [0.2, 0.1, -0.4];
        let acts = stack.forward(&x).unwrap();
        let p = acts[0][0];
        let dl_dp = -1.0 / p;
        let mut grads = crate::nn::zeroed(&stack);
        stack.backward(&x, &acts, &[dl_dp], &mut grads);
        assert!((grads.layers()[0].bias()[0] - -0.5).abs() < 1e-15);
    }

    #[test]
    fn tensor_views_are_consistent() {
        let mut stack = MlpStack::zeros(3, &[4, 1], Activation::Relu, Activation::Sigmoid).unwrap();
        let lens: Vec<usize> = stack.tensors().iter().map(|t| t.data.len()).collect();
        let lens_mut: Vec<usize> = stack.tensors_mut().iter().map(|t| t.len()).collect();
        assert_eq!(lens, lens_mut);
        assert_eq!(lens, vec![12, 4, 4, 1]);
    }
}
