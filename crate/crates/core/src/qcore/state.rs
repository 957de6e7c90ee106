use super::C64;
use crate::{Error, Result};

/// Unit-norm amplitude vector over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
    n_qubits: usize,
}

pub const NORM_TOL: f64 = 1e-10;

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = C64::new(1.0, 0.0);
        StateVector { amps, n_qubits }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = C64::new(1.0, 0.0);
        StateVector { amps, n_qubits }
    }

    /// Wraps amplitudes, checking length and unit norm.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amps.len())?;
        let norm = norm_sqr(&amps).sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state norm {norm} differs from 1")));
        }
        Ok(StateVector { amps, n_qubits })
    }

    /// Wraps amplitudes after dividing by their norm.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amps.len())?;
        let norm = norm_sqr(&amps).sqrt();
        if norm < 1e-300 {
            return Err(Error::Degenerate("zero vector cannot be normalized".into()));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Ok(StateVector { amps, n_qubits })
    }

    /// Haar-random state: normalized complex Gaussian vector.
    pub fn haar(n_qubits: usize, r: &mut crate::rng::Rng) -> Self {
        use rand::Rng as _;
        use rand_distr::StandardNormal;
        let amps = (0..1usize << n_qubits)
            .map(|_| C64::new(r.sample(StandardNormal), r.sample(StandardNormal)))
            .collect();
        Self::normalized(amps).expect("gaussian vector is nonzero")
    }

    pub(crate) fn from_raw(amps: Vec<C64>, n_qubits: usize) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        StateVector { amps, n_qubits }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amps).sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `self ⊗ other`, with `self` on the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector {
            amps,
            n_qubits: self.n_qubits + other.n_qubits,
        }
    }
}

pub(crate) fn norm_sqr(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::InvalidState(format!(
            "amplitude count {len} is not a power of two"
        )));
    }
    Ok(len.trailing_zeros() as usize)
}
