//! Classical parameter generators: MLP experts with softmax gating, and the
//! no-latent, random-deterministic and direct density-matrix baselines.

mod baselines;
pub mod checkpoint;
mod mlp;
mod moe;

pub use baselines::{
    output_to_state, sample_no_latent, Lmlp, LmlpTrace, LmlpVariant, NoLatentSample, NoLatentSpec, RdGenerator,
};
pub use mlp::{softmax, Activation, Mlp, MlpSpec, MlpTrace};
pub use moe::{gating_l1_to_one_hot, gating_spec, Generator, GeneratorGrads, MoeTrace, GATING_HIDDEN};

/// Anything with trainable tensors the optimizer can update in place.
pub trait Trainable {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zero_like(&self) -> Vec<Vec<f64>> {
        self.tensors().iter().map(|t| vec![0.0; t.len()]).collect()
    }
}
