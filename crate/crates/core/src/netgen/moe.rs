use super::mlp::{softmax, Activation, Mlp, MlpSpec, MlpTrace};
use super::Trainable;
use crate::qcore::QubitLayout;
use crate::{rng::Rng, Error, Result};

/// Hidden width of the gating network `MLP(d, 32^(1), E)`.
pub const GATING_HIDDEN: usize = 32;

/// Mixture-of-experts parameter generator: `E` expert MLPs `d → K` and, for
/// `E > 1`, a tanh gating MLP `d → E` whose softmax mixes the expert
/// outputs into one angle vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    layout: QubitLayout,
    experts: Vec<Mlp>,
    gating: Option<Mlp>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct MoeTrace {
    experts: Vec<MlpTrace>,
    gating: Option<MlpTrace>,
    /// Gate probabilities `π(z)`.
    pub pi: Vec<f64>,
    /// Mixed angles `θ(z) = Σ πᵢ θ⁽ⁱ⁾(z)`.
    pub theta: Vec<f64>,
}

/// Gradients aligned with [`Generator::tensors`].
pub type GeneratorGrads = Vec<Vec<f64>>;

impl Generator {
    /// Fresh generator with Glorot-initialized experts of shape
    /// `MLP(latent_dim, hidden^(depth), K)`.
    pub fn new(
        layout: QubitLayout,
        latent_dim: usize,
        hidden: usize,
        depth: usize,
        activation: Activation,
        n_experts: usize,
        r: &mut Rng,
    ) -> Result<Self> {
        if n_experts == 0 {
            return Err(Error::Config("at least one expert is required".into()));
        }
        let spec = MlpSpec {
            d_in: latent_dim,
            hidden,
            depth,
            d_out: layout.param_count(),
            activation,
        };
        let experts = (0..n_experts).map(|_| Mlp::glorot(spec, r)).collect();
        let gating = (n_experts > 1).then(|| Mlp::glorot(gating_spec(latent_dim, n_experts), r));
        Ok(Generator {
            layout,
            experts,
            gating,
        })
    }

    pub fn from_parts(layout: QubitLayout, experts: Vec<Mlp>, gating: Option<Mlp>) -> Result<Self> {
        let first = experts
            .first()
            .ok_or_else(|| Error::Config("at least one expert is required".into()))?;
        let d_in = first.spec().d_in;
        for e in &experts {
            if e.spec().d_out != layout.param_count() {
                return Err(Error::shape("expert output", layout.param_count(), e.spec().d_out));
            }
            if e.spec().d_in != d_in {
                return Err(Error::shape("expert input", d_in, e.spec().d_in));
            }
        }
        match (&gating, experts.len()) {
            (None, 1) => {}
            (Some(g), n) if n > 1 => {
                if g.spec().d_out != n || g.spec().d_in != d_in {
                    return Err(Error::Config("gating network shape does not match experts".into()));
                }
            }
            _ => {
                return Err(Error::Config(
                    "a gating network is required exactly when there are several experts".into(),
                ))
            }
        }
        Ok(Generator {
            layout,
            experts,
            gating,
        })
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    pub fn experts(&self) -> &[Mlp] {
        &self.experts
    }

    pub fn experts_mut(&mut self) -> &mut [Mlp] {
        &mut self.experts
    }

    pub fn gating(&self) -> Option<&Mlp> {
        self.gating.as_ref()
    }

    pub fn n_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.experts[0].spec().d_in
    }

    /// Softmax gate probabilities; `[1.0]` for a single expert.
    pub fn gate_weights(&self, z: &[f64]) -> Result<Vec<f64>> {
        match &self.gating {
            None => {
                if z.len() != self.latent_dim() {
                    return Err(Error::shape("latent vector", self.latent_dim(), z.len()));
                }
                Ok(vec![1.0])
            }
            Some(g) => Ok(softmax(&g.forward(z)?)),
        }
    }

    /// `θ(z) = Σᵢ πᵢ(z) θ⁽ⁱ⁾(z)`.
    pub fn parameters(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(z)?.theta)
    }

    pub fn forward_trace(&self, z: &[f64]) -> Result<MoeTrace> {
        let experts: Vec<MlpTrace> = self.experts.iter().map(|e| e.forward_trace(z)).collect::<Result<_>>()?;
        let gating = self.gating.as_ref().map(|g| g.forward_trace(z)).transpose()?;
        let pi = match &gating {
            None => vec![1.0],
            Some(t) => softmax(&t.output),
        };
        let k = self.layout.param_count();
        let mut theta = vec![0.0; k];
        for (p, t) in pi.iter().zip(&experts) {
            for (acc, v) in theta.iter_mut().zip(&t.output) {
                *acc += p * v;
            }
        }
        Ok(MoeTrace {
            experts,
            gating,
            pi,
            theta,
        })
    }

    pub fn zero_grads(&self) -> GeneratorGrads {
        self.tensors().iter().map(|t| vec![0.0; t.len()]).collect()
    }

    /// Backpropagates `∂L/∂θ` and an extra `∂L/∂π` (e.g. from an entropy
    /// penalty) through mixing, softmax and both networks.
    pub fn backward(&self, trace: &MoeTrace, d_theta: &[f64], d_pi_extra: &[f64], grads: &mut GeneratorGrads) {
        let n = self.experts.len();
        for (i, (e, t)) in self.experts.iter().zip(&trace.experts).enumerate() {
            let scaled: Vec<f64> = d_theta.iter().map(|g| trace.pi[i] * g).collect();
            e.backward(t, &scaled, &mut grads[i]);
        }
        if let (Some(g), Some(t)) = (&self.gating, &trace.gating) {
            let d_pi: Vec<f64> = (0..n)
                .map(|i| {
                    let mix: f64 = d_theta.iter().zip(&trace.experts[i].output).map(|(a, b)| a * b).sum();
                    mix + d_pi_extra.get(i).copied().unwrap_or(0.0)
                })
                .collect();
            let mean: f64 = trace.pi.iter().zip(&d_pi).map(|(p, d)| p * d).sum();
            let d_logits: Vec<f64> = trace.pi.iter().zip(&d_pi).map(|(p, d)| p * (d - mean)).collect();
            g.backward(t, &d_logits, &mut grads[n]);
        }
    }
}

/// Shape of the gating network for `n_experts`.
pub fn gating_spec(latent_dim: usize, n_experts: usize) -> MlpSpec {
    MlpSpec {
        d_in: latent_dim,
        hidden: GATING_HIDDEN,
        depth: 1,
        d_out: n_experts,
        activation: Activation::Tanh,
    }
}

impl Trainable for Generator {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.experts.iter().map(|e| e.params()).collect();
        if let Some(g) = &self.gating {
            v.push(g.params());
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.experts.iter_mut().map(|e| e.params_mut()).collect();
        if let Some(g) = &mut self.gating {
            v.push(g.params_mut());
        }
        v
    }
}

/// `Σᵢ |πᵢ − χᵢ|` against the one-hot indicator of `hot`.
pub fn gating_l1_to_one_hot(pi: &[f64], hot: usize) -> f64 {
    pi.iter()
        .enumerate()
        .map(|(i, &p)| if i == hot { (p - 1.0).abs() } else { p.abs() })
        .sum()
}
