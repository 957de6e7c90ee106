use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Register sizes and depth of the hardware-efficient ansatz.
///
/// Layer 0 is rotation-only; each of the `layers` entangling layers is a
/// CNOT chain followed by rotations. Every layer carries one (Y, Z) angle
/// pair per qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitLayout {
    pub n_data: usize,
    pub n_anc: usize,
    pub layers: usize,
}

impl QubitLayout {
    pub fn new(n_data: usize, n_anc: usize, layers: usize) -> Result<Self> {
        if n_data == 0 {
            return Err(Error::Config("n_data must be at least 1".into()));
        }
        if n_data + n_anc > 24 {
            return Err(Error::Config(format!(
                "{} qubits exceed the dense simulator limit of 24",
                n_data + n_anc
            )));
        }
        Ok(QubitLayout { n_data, n_anc, layers })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_data + self.n_anc
    }

    /// Full Hilbert-space dimension `2^(n+m)`.
    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    pub fn data_dim(&self) -> usize {
        1 << self.n_data
    }

    pub fn params_per_layer(&self) -> usize {
        2 * self.n_qubits()
    }

    /// `K = 2(n+m)(L+1)`.
    pub fn param_count(&self) -> usize {
        self.params_per_layer() * (self.layers + 1)
    }

    /// Index of the (Y, Z) pair for `qubit` in `layer`.
    pub fn angle_index(&self, layer: usize, qubit: usize) -> (usize, usize) {
        let base = layer * self.params_per_layer() + 2 * qubit;
        (base, base + 1)
    }
}
