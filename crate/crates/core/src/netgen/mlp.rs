use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{rng::Rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    /// Exact form `x·Φ(x)`.
    Gelu,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Gelu => x * normal_cdf(x),
            Activation::Linear => x,
        }
    }

    /// Derivative at pre-activation `x`.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => normal_cdf(x) + x * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Activation::Linear => 1.0,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
            Activation::Gelu => 2,
            Activation::Linear => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Activation::Tanh,
            1 => Activation::Relu,
            2 => Activation::Gelu,
            3 => Activation::Linear,
            _ => return None,
        })
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// `MLP(d_in, hidden^(depth), d_out)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub d_in: usize,
    pub hidden: usize,
    pub depth: usize,
    pub d_out: usize,
    pub activation: Activation,
}

impl MlpSpec {
    /// Layer widths `(d_in, hidden × depth, d_out)`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.d_in];
        w.extend(std::iter::repeat(self.hidden).take(self.depth));
        w.push(self.d_out);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Dense multilayer perceptron with all weights in one buffer. Each layer
/// stores its weight matrix row-major (`out × in`) followed by its bias.
/// Hidden layers apply the activation; the output layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<f64>,
}

/// Per-layer values saved by [`Mlp::forward_trace`] for backpropagation.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Mlp {
    pub fn zeros(spec: MlpSpec) -> Self {
        Mlp {
            spec,
            params: vec![0.0; spec.param_count()],
        }
    }

    /// Weights uniform in `±√(6/(fan_in+fan_out))`, zero biases.
    pub fn glorot(spec: MlpSpec, r: &mut Rng) -> Self {
        let mut params = Vec::with_capacity(spec.param_count());
        for w in spec.widths().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| r.gen_range(-bound..bound)));
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Mlp { spec, params }
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        if params.len() != spec.param_count() {
            return Err(Error::shape("mlp parameter count", spec.param_count(), params.len()));
        }
        Ok(Mlp { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(z)?.output)
    }

    pub fn forward_trace(&self, z: &[f64]) -> Result<MlpTrace> {
        if z.len() != self.spec.d_in {
            return Err(Error::shape("mlp input", self.spec.d_in, z.len()));
        }
        let widths = self.spec.widths();
        let n_layers = widths.len() - 1;
        let mut inputs = vec![z.to_vec()];
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut offset = 0;
        let mut output = Vec::new();
        for l in 0..n_layers {
            let (fi, fo) = (widths[l], widths[l + 1]);
            let w = &self.params[offset..offset + fi * fo];
            let b = &self.params[offset + fi * fo..offset + fi * fo + fo];
            offset += fi * fo + fo;
            let x = &inputs[l];
            let y: Vec<f64> = (0..fo)
                .map(|o| b[o] + w[o * fi..(o + 1) * fi].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            if l + 1 < n_layers {
                let act = y.iter().map(|&v| self.spec.activation.apply(v)).collect();
                pre.push(y);
                inputs.push(act);
            } else {
                output = y;
            }
        }
        Ok(MlpTrace { inputs, pre, output })
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output`; returns
    /// `∂L/∂input`.
    pub fn backward(&self, trace: &MlpTrace, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grad.len(), self.params.len());
        let widths = self.spec.widths();
        let n_layers = widths.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in widths.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..n_layers).rev() {
            let (fi, fo) = (widths[l], widths[l + 1]);
            let off = offsets[l];
            let x = &trace.inputs[l];
            for o in 0..fo {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut grad[off + o * fi..off + (o + 1) * fi];
                    for (g, xi) in row.iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
                grad[off + fi * fo + o] += d;
            }
            let w = &self.params[off..off + fi * fo];
            let mut prev = vec![0.0; fi];
            for o in 0..fo {
                let d = delta[o];
                if d != 0.0 {
                    for (p, wi) in prev.iter_mut().zip(&w[o * fi..(o + 1) * fi]) {
                        *p += d * wi;
                    }
                }
            }
            if l > 0 {
                for (p, &z) in prev.iter_mut().zip(&trace.pre[l - 1]) {
                    *p *= self.spec.activation.derivative(z);
                }
            }
            delta = prev;
        }
        delta
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
