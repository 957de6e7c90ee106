//! Dense statevector simulation of the hardware-efficient ansatz, partial
//! trace down to the data register, and the state-space metrics used by the
//! loss.
//!
//! Qubit 0 is the most significant bit of an amplitude index. Ancilla qubits
//! are the trailing (least significant) ones, so tracing them out sums over
//! contiguous blocks of `2^m` amplitudes.

mod circuit;
mod density;
mod layout;
mod state;

pub use circuit::{Circuit, Gate};
pub use density::{
    dm_from_real_vector, dm_to_real_vector, mixedness_ratio, partial_trace_ancilla, purity, super_fidelity,
    super_fidelity_from_parts, super_fidelity_grad, trace_distance, trace_product, DensityMatrix,
};
pub use layout::QubitLayout;
pub use state::StateVector;

use num_complex::Complex64;

pub type C64 = Complex64;

/// `U(θ)|input⟩` for the hardware-efficient ansatz of `layout`.
pub fn hea_apply(layout: &QubitLayout, angles: &[f64], input: &StateVector) -> crate::Result<StateVector> {
    let circuit = Circuit::hea(layout);
    circuit.run(angles, input)
}
