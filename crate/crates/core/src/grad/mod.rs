//! Reverse-mode gradients through the full generator pipeline, the
//! parameter-shift oracle, and the Adam optimizer.

mod adam;
pub mod bench;
mod pipeline;

use nalgebra::DMatrix;

use crate::qcore::{partial_trace_ancilla, Circuit, DensityMatrix, QubitLayout, StateVector, C64};
use crate::{Error, Result};

pub use adam::{adam_step, AdamState};
pub use pipeline::{
    circuit_batch_grad, lmlp_backward, lpqc_backward, no_latent_backward, rd_backward, CircuitBatch, LossParts,
};

/// `(G ⊗ I_anc)|ψ⟩`: the state-space cotangent of `L` when `dL = tr(G dρ)`
/// and `ρ` is `|ψ⟩⟨ψ|` with the trailing `n_anc` qubits traced out.
pub fn embed_cotangent(g: &DMatrix<C64>, psi: &[C64], n_anc: usize) -> Vec<C64> {
    let block = 1usize << n_anc;
    let d = g.nrows();
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for i in 0..d {
        for j in 0..d {
            let gij = g[(i, j)];
            if gij == C64::new(0.0, 0.0) {
                continue;
            }
            let src = &psi[j * block..(j + 1) * block];
            for (o, s) in out[i * block..(i + 1) * block].iter_mut().zip(src) {
                *o += gij * s;
            }
        }
    }
    out
}

/// Exact `∂L/∂θ` for a loss of the reduced state with Hermitian cotangent
/// `G = ∂L/∂ρ`, by one forward pass and one reverse sweep of the ansatz.
pub fn circuit_grad_adjoint(layout: &QubitLayout, angles: &[f64], cotangent: &DMatrix<C64>) -> Result<Vec<f64>> {
    if cotangent.nrows() != layout.data_dim() || cotangent.ncols() != layout.data_dim() {
        return Err(Error::shape(
            "cotangent dimension",
            layout.data_dim(),
            cotangent.nrows(),
        ));
    }
    let circuit = Circuit::hea(layout);
    let psi = circuit.run_from_zero(angles)?;
    let lambda = embed_cotangent(cotangent, psi.amplitudes(), layout.n_anc);
    circuit.vjp(angles, psi.amplitudes(), &lambda)
}

/// Reduced data-register state of the ansatz at `angles`.
pub fn generated_state(layout: &QubitLayout, angles: &[f64]) -> Result<DensityMatrix> {
    let psi = Circuit::hea(layout).run(angles, &StateVector::zero(layout.n_qubits()))?;
    partial_trace_ancilla(&psi, layout.n_anc)
}

/// `∂L/∂θₖ = ½[L(θₖ + π/2) − L(θₖ − π/2)]`, valid because every angle
/// drives a single Pauli rotation.
pub fn circuit_grad_paramshift(
    layout: &QubitLayout,
    angles: &[f64],
    loss: impl Fn(&DensityMatrix) -> f64,
) -> Result<Vec<f64>> {
    if angles.len() != layout.param_count() {
        return Err(Error::shape("angles", layout.param_count(), angles.len()));
    }
    let shift = std::f64::consts::FRAC_PI_2;
    let mut theta = angles.to_vec();
    (0..angles.len())
        .map(|k| {
            theta[k] = angles[k] + shift;
            let plus = loss(&generated_state(layout, &theta)?);
            theta[k] = angles[k] - shift;
            let minus = loss(&generated_state(layout, &theta)?);
            theta[k] = angles[k];
            Ok(0.5 * (plus - minus))
        })
        .collect()
}
