use rand_distr::{Distribution, Normal};

use crate::qcore::{partial_trace_ancilla, Circuit, DensityMatrix, StateVector, C64};
use crate::{rng, Error, Result};

/// Standard deviation of the perturbation angles.
pub const DEFAULT_SCALE: f64 = 0.05;

/// The four cluster centers on `n_qubits`: `|0…0⟩`, `|1…1⟩`, and the two
/// GHZ states `(|0…0⟩ ± |1…1⟩)/√2`.
pub fn cluster_centers(n_qubits: usize) -> [StateVector; 4] {
    let last = (1usize << n_qubits) - 1;
    let ghz = |sign: f64| {
        let mut a = vec![C64::new(0.0, 0.0); last + 1];
        a[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        a[last] += C64::new(sign * std::f64::consts::FRAC_1_SQRT_2, 0.0);
        StateVector::normalized(a).expect("nonzero")
    };
    [
        StateVector::zero(n_qubits),
        StateVector::basis(n_qubits, last),
        ghz(1.0),
        ghz(-1.0),
    ]
}

/// Samples with the index of the center each came from.
#[derive(Debug, Clone)]
pub struct ClusterSample {
    pub states: Vec<DensityMatrix>,
    pub labels: Vec<usize>,
}

/// `count/4` states per center. Each sample applies one rotation layer with
/// angles `~ N(0, scale²)` to its center on `n + m` qubits and traces out the
/// `m` ancillas. Samples are grouped by center in center order.
pub fn gen_multicluster_scaled(n: usize, m: usize, count: usize, seed: u64, scale: f64) -> Result<ClusterSample> {
    if count % 4 != 0 {
        return Err(Error::Config(format!("sample count {count} is not divisible by 4")));
    }
    if n == 0 {
        return Err(Error::Config("need at least one data qubit".into()));
    }
    if !(scale >= 0.0) {
        return Err(Error::Config(format!(
            "perturbation scale must be non-negative, got {scale}"
        )));
    }
    let nq = n + m;
    let centers = cluster_centers(nq);
    let layer = Circuit::rotation_layer(nq);
    let normal = Normal::new(0.0, scale).expect("valid scale");
    let mut r = rng::stream(seed, 0);
    let mut states = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..count / 4 {
            let angles: Vec<f64> = (0..layer.n_params()).map(|_| normal.sample(&mut r)).collect();
            let psi = layer.run(&angles, center)?;
            states.push(partial_trace_ancilla(&psi, m)?);
            labels.push(c);
        }
    }
    Ok(ClusterSample { states, labels })
}

pub fn gen_multicluster(n: usize, m: usize, count: usize, seed: u64) -> Result<Vec<DensityMatrix>> {
    Ok(gen_multicluster_scaled(n, m, count, seed, DEFAULT_SCALE)?.states)
}
