use nalgebra::{DMatrix, SymmetricEigen};

use super::{StateVector, C64};
use crate::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

/// Hermitian, positive semidefinite, unit-trace matrix on the data register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates and wraps a matrix.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let rho = DensityMatrix { m };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps without the eigenvalue check; callers guarantee the invariants
    /// by construction (e.g. partial traces of unit states).
    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        DensityMatrix { m }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(state: &StateVector) -> Self {
        let a = state.amplitudes();
        let d = a.len();
        DensityMatrix {
            m: DMatrix::from_fn(d, d, |i, j| a[i] * a[j].conj()),
        }
    }

    /// Random state of rank ≤ `2^n_env`: a Haar state on `n_qubits + n_env`
    /// qubits with the environment traced out.
    pub fn random(n_qubits: usize, n_env: usize, r: &mut crate::rng::Rng) -> Self {
        reduce_amplitudes(StateVector::haar(n_qubits + n_env, r).amplitudes(), n_env)
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        DensityMatrix {
            m: DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.m)
    }

    /// Checks the Hermitian, trace and PSD invariants.
    pub fn validate(&self) -> Result<()> {
        let d = self.m.nrows();
        if d != self.m.ncols() || d == 0 || !d.is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "density matrix must be square with power-of-two size, got {}x{}",
                d,
                self.m.ncols()
            )));
        }
        for i in 0..d {
            for j in i..d {
                let diff = self.m[(i, j)] - self.m[(j, i)].conj();
                if diff.re.abs() > HERMITIAN_TOL || diff.im.abs() > HERMITIAN_TOL {
                    return Err(Error::InvalidState(format!(
                        "not Hermitian at ({i},{j}): deviation {}",
                        diff.norm()
                    )));
                }
            }
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min}")));
        }
        Ok(())
    }
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

fn same_dim(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::shape("density matrix dimension", rho.dim(), sigma.dim()));
    }
    Ok(())
}

/// `Tr_A |ψ⟩⟨ψ|` over the trailing `n_anc` qubits.
pub fn partial_trace_ancilla(state: &StateVector, n_anc: usize) -> Result<DensityMatrix> {
    if n_anc >= state.n_qubits() {
        return Err(Error::shape(
            "ancilla count below total qubits",
            state.n_qubits().saturating_sub(1),
            n_anc,
        ));
    }
    Ok(reduce_amplitudes(state.amplitudes(), n_anc))
}

pub(crate) fn reduce_amplitudes(amps: &[C64], n_anc: usize) -> DensityMatrix {
    let block = 1usize << n_anc;
    let d = amps.len() / block;
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        let ri = &amps[i * block..(i + 1) * block];
        for j in i..d {
            let rj = &amps[j * block..(j + 1) * block];
            let v: C64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    DensityMatrix::from_matrix_unchecked(m)
}

/// `tr(ρσ)` for Hermitian arguments.
pub fn trace_product(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> f64 {
    rho.iter().zip(sigma.iter()).map(|(a, b)| (a * b.conj()).re).sum()
}

/// `tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.m.iter().map(|a| a.norm_sqr()).sum()
}

/// Super-fidelity `tr(ρσ) + √((1−tr ρ²)(1−tr σ²))`.
pub fn super_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    Ok(super_fidelity_from_parts(
        trace_product(&rho.m, &sigma.m),
        purity(rho),
        purity(sigma),
    ))
}

/// Mixedness `1 − tr ρ²` below this is rounding noise of a pure state and
/// is read as zero.
pub const PURE_SNAP: f64 = 1e-13;

fn mixedness(purity: f64) -> f64 {
    let x = 1.0 - purity;
    if x < PURE_SNAP {
        0.0
    } else {
        x
    }
}

/// Super-fidelity from `tr(ρσ)` and the two purities.
pub fn super_fidelity_from_parts(overlap: f64, purity_rho: f64, purity_sigma: f64) -> f64 {
    overlap + (mixedness(purity_rho) * mixedness(purity_sigma)).sqrt()
}

/// Lower clamp on `1 − tr ρ²` inside the kernel derivative.
pub const MIXEDNESS_FLOOR: f64 = 1e-12;

/// `∂κ(ρ,σ)/∂ρ` as a Hermitian matrix `G` with `dκ = tr(G dρ)`:
/// `G = σ − ρ·√((1−tr σ²)/(1−tr ρ²))`, the denominator floored at
/// [`MIXEDNESS_FLOOR`].
pub fn super_fidelity_grad(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<DMatrix<C64>> {
    same_dim(rho, sigma)?;
    let coef = mixedness_ratio(purity(rho), purity(sigma));
    Ok(&sigma.m - &rho.m * C64::new(coef, 0.0))
}

/// `√((1−tr σ²)/(1−tr ρ²))` with the same pure-state handling as
/// [`super_fidelity_grad`].
pub fn mixedness_ratio(purity_rho: f64, purity_sigma: f64) -> f64 {
    let num = mixedness(purity_sigma);
    let den = (1.0 - purity_rho).max(MIXEDNESS_FLOOR);
    (num / den).sqrt()
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    let diff = &rho.m - &sigma.m;
    Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>())
}

/// Real coordinates of a Hermitian matrix: the diagonal, then the real parts
/// of the strict upper triangle (row-major), then their imaginary parts.
pub fn dm_to_real_vector(rho: &DensityMatrix) -> Vec<f64> {
    let d = rho.dim();
    let off = d * (d - 1) / 2;
    let mut out = Vec::with_capacity(d + 2 * off);
    out.extend((0..d).map(|i| rho.m[(i, i)].re));
    let upper: Vec<C64> = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .map(|(i, j)| rho.m[(i, j)])
        .collect();
    out.extend(upper.iter().map(|z| z.re));
    out.extend(upper.iter().map(|z| z.im));
    out
}

/// Inverse of [`dm_to_real_vector`]; the result is validated.
pub fn dm_from_real_vector(v: &[f64]) -> Result<DensityMatrix> {
    // len = d²
    let d = (v.len() as f64).sqrt().round() as usize;
    if d * d != v.len() {
        return Err(Error::shape("real vector length (perfect square)", d * d, v.len()));
    }
    let off = d * (d - 1) / 2;
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(v[i], 0.0);
    }
    let mut k = 0;
    for i in 0..d {
        for j in i + 1..d {
            let z = C64::new(v[d + k], v[d + off + k]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 1;
        }
    }
    DensityMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut r = rng::stream(seed, 0);
        let amps = (0..1 << n)
            .map(|_| C64::new(r.sample(StandardNormal), r.sample(StandardNormal)))
            .collect();
        StateVector::normalized(amps).unwrap()
    }

    fn random_mixed(n_data: usize, n_anc: usize, seed: u64) -> DensityMatrix {
        partial_trace_ancilla(&random_state(n_data + n_anc, seed), n_anc).unwrap()
    }

    fn ket(bits: &[f64]) -> StateVector {
        StateVector::normalized(bits.iter().map(|&b| C64::new(b, 0.0)).collect()).unwrap()
    }

    #[test]
    fn bell_pair_reduces_to_maximally_mixed() {
        let bell = ket(&[1.0, 0.0, 0.0, 1.0]);
        let rho = partial_trace_ancilla(&bell, 1).unwrap();
        assert!((rho.matrix() - DensityMatrix::maximally_mixed(1).matrix()).norm() < 1e-15);
    }

    #[test]
    fn product_with_zero_ancilla_is_pure_projector() {
        let psi = random_state(2, 1);
        let full = psi.tensor(&StateVector::zero(1));
        let rho = partial_trace_ancilla(&full, 1).unwrap();
        assert!((rho.matrix() - DensityMatrix::pure(&psi).matrix()).norm() < 1e-14);
        let rho0 = partial_trace_ancilla(&psi, 0).unwrap();
        assert!((rho0.matrix() - DensityMatrix::pure(&psi).matrix()).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_matches_index_contraction() {
        let psi = random_state(3, 2);
        let rho = partial_trace_ancilla(&psi, 1).unwrap();
        let a = psi.amplitudes();
        for d1 in 0..4 {
            for d2 in 0..4 {
                let mut v = C64::new(0.0, 0.0);
                for anc in 0..2 {
                    v += a[d1 * 2 + anc] * a[d2 * 2 + anc].conj();
                }
                assert!((rho.matrix()[(d1, d2)] - v).norm() < 1e-15);
            }
        }
        rho.validate().unwrap();
    }

    #[test]
    fn super_fidelity_examples() {
        let zero = DensityMatrix::pure(&ket(&[1.0, 0.0]));
        let one = DensityMatrix::pure(&ket(&[0.0, 1.0]));
        let mixed = DensityMatrix::maximally_mixed(1);
        assert!(super_fidelity(&zero, &one).unwrap().abs() < 1e-15);
        assert!((super_fidelity(&mixed, &zero).unwrap() - 0.5).abs() < 1e-15);
        for seed in 0..5 {
            let rho = random_mixed(2, 1, seed);
            assert!((super_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn super_fidelity_against_pure_is_expectation() {
        let rho = random_mixed(2, 2, 3);
        let psi = random_state(2, 4);
        let sigma = DensityMatrix::pure(&psi);
        let a = psi.amplitudes();
        let m = rho.matrix();
        let mut expect = C64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                expect += a[i].conj() * m[(i, j)] * a[j];
            }
        }
        assert!((super_fidelity(&rho, &sigma).unwrap() - expect.re).abs() < 1e-12);
        assert!(super_fidelity(&rho, &sigma).unwrap() - super_fidelity(&sigma, &rho).unwrap() < 1e-15);
    }

    #[test]
    fn trace_distance_examples() {
        let zero = DensityMatrix::pure(&ket(&[1.0, 0.0]));
        let one = DensityMatrix::pure(&ket(&[0.0, 1.0]));
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-12);
        assert!(trace_distance(&zero, &zero).unwrap().abs() < 1e-12);
        for seed in 0..10 {
            let phi = random_state(2, 100 + seed);
            let psi = random_state(2, 200 + seed);
            let d = trace_distance(&DensityMatrix::pure(&phi), &DensityMatrix::pure(&psi)).unwrap();
            let oracle = (1.0 - phi.inner(&psi).norm_sqr()).sqrt();
            assert!((d - oracle).abs() < 1e-10, "{d} vs {oracle}");
        }
    }

    #[test]
    fn purity_examples() {
        assert!((purity(&DensityMatrix::pure(&ket(&[1.0, 0.0]))) - 1.0).abs() < 1e-15);
        assert!((purity(&DensityMatrix::maximally_mixed(3)) - 0.125).abs() < 1e-15);
        let rho = random_mixed(2, 2, 9);
        let oracle: f64 = rho.eigenvalues().iter().map(|l| l * l).sum();
        assert!((purity(&rho) - oracle).abs() < 1e-12);
    }

    #[test]
    fn real_vector_layout_and_round_trip() {
        assert_eq!(
            dm_to_real_vector(&DensityMatrix::maximally_mixed(1)),
            vec![0.5, 0.5, 0.0, 0.0]
        );
        assert_eq!(
            dm_to_real_vector(&DensityMatrix::pure(&ket(&[1.0, 0.0]))),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        let rho = random_mixed(2, 1, 5);
        let back = dm_from_real_vector(&dm_to_real_vector(&rho)).unwrap();
        assert!((back.matrix() - rho.matrix()).norm() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let mut m = DMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.5, 0.0),
            C64::new(-0.5, 0.0),
        ]));
        assert!(DensityMatrix::new(m).is_err());
        let m = DMatrix::identity(2, 2) * C64::new(0.7, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = DensityMatrix::maximally_mixed(1);
        let b = DensityMatrix::maximally_mixed(2);
        assert!(super_fidelity(&a, &b).is_err());
        assert!(trace_distance(&a, &b).is_err());
    }
}
