use nalgebra::DMatrix;

use super::{QubitLayout, StateVector, C64};
use crate::{Error, Result};

/// Gate set of the simulator. Rotations are `exp(-iθP/2)` for a Pauli `P`
/// whose angle is read from slot `param` of the angle vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Rx { qubit: usize, param: usize },
    Ry { qubit: usize, param: usize },
    Rz { qubit: usize, param: usize },
    Cnot { control: usize, target: usize },
    Cz { a: usize, b: usize },
}

/// Fixed gate sequence over `n_qubits` with `n_params` angle slots.
/// Gates act in list order.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    n_params: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_params: usize, gates: Vec<Gate>) -> Self {
        Circuit {
            n_qubits,
            n_params,
            gates,
        }
    }

    /// Hardware-efficient ansatz: layer 0 applies `RY·RZ` on every qubit;
    /// each later layer applies `CNOT(0,1), CNOT(1,2), …` and then the
    /// rotations. Within a rotation the Z angle acts first.
    pub fn hea(layout: &QubitLayout) -> Self {
        let nq = layout.n_qubits();
        let mut gates = Vec::with_capacity(layout.param_count() + nq * layout.layers);
        for layer in 0..=layout.layers {
            if layer > 0 {
                for p in 0..nq.saturating_sub(1) {
                    gates.push(Gate::Cnot {
                        control: p,
                        target: p + 1,
                    });
                }
            }
            for p in 0..nq {
                let (y, z) = layout.angle_index(layer, p);
                gates.push(Gate::Rz { qubit: p, param: z });
                gates.push(Gate::Ry { qubit: p, param: y });
            }
        }
        Circuit::new(nq, layout.param_count(), gates)
    }

    /// Single rotation-only layer (`U_0` of the ansatz) on `n_qubits`.
    pub fn rotation_layer(n_qubits: usize) -> Self {
        let layout = QubitLayout {
            n_data: n_qubits,
            n_anc: 0,
            layers: 0,
        };
        Circuit::hea(&layout)
    }

    /// Ansatz of the projected-ensemble baseline: `layers` repetitions of
    /// per-qubit `RX·RY` (Y first) followed by a nearest-neighbour CZ chain.
    /// Angles are layer-major, then qubit-major, then (Y, X).
    pub fn impe(n_qubits: usize, layers: usize) -> Self {
        let per_layer = 2 * n_qubits;
        let mut gates = Vec::new();
        for layer in 0..layers {
            for p in 0..n_qubits {
                let base = layer * per_layer + 2 * p;
                gates.push(Gate::Ry { qubit: p, param: base });
                gates.push(Gate::Rx {
                    qubit: p,
                    param: base + 1,
                });
            }
            for p in 0..n_qubits.saturating_sub(1) {
                gates.push(Gate::Cz { a: p, b: p + 1 });
            }
        }
        Circuit::new(n_qubits, per_layer * layers, gates)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    fn check(&self, angles: &[f64], len: usize) -> Result<()> {
        if angles.len() != self.n_params {
            return Err(Error::shape("angle vector", self.n_params, angles.len()));
        }
        if len != 1 << self.n_qubits {
            return Err(Error::shape("state dimension", 1 << self.n_qubits, len));
        }
        Ok(())
    }

    /// Applies the circuit to `input`.
    pub fn run(&self, angles: &[f64], input: &StateVector) -> Result<StateVector> {
        let mut amps = input.amplitudes().to_vec();
        self.apply(angles, &mut amps)?;
        Ok(StateVector::from_raw(amps, self.n_qubits))
    }

    /// `U(θ)|0…0⟩`.
    pub fn run_from_zero(&self, angles: &[f64]) -> Result<StateVector> {
        self.run(angles, &StateVector::zero(self.n_qubits))
    }

    pub fn apply(&self, angles: &[f64], amps: &mut [C64]) -> Result<()> {
        self.check(angles, amps.len())?;
        for g in &self.gates {
            apply_gate(*g, angles, amps, self.n_qubits, false);
        }
        Ok(())
    }

    pub fn apply_inverse(&self, angles: &[f64], amps: &mut [C64]) -> Result<()> {
        self.check(angles, amps.len())?;
        for g in self.gates.iter().rev() {
            apply_gate(*g, angles, amps, self.n_qubits, true);
        }
        Ok(())
    }

    /// Vector-Jacobian product of the circuit output.
    ///
    /// Given the output `final_state = U(θ)|in⟩` and a cotangent `lambda`
    /// such that `dL = 2·Re⟨λ|dψ⟩`, returns `∂L/∂θ`. The sweep uncomputes
    /// the state gate by gate and pulls `λ` back alongside it; each rotation
    /// contributes `Im⟨μ|P|φ⟩` evaluated just after the gate.
    pub fn vjp(&self, angles: &[f64], final_state: &[C64], lambda: &[C64]) -> Result<Vec<f64>> {
        self.check(angles, final_state.len())?;
        if lambda.len() != final_state.len() {
            return Err(Error::shape("cotangent", final_state.len(), lambda.len()));
        }
        let mut phi = final_state.to_vec();
        let mut mu = lambda.to_vec();
        let mut grad = vec![0.0; self.n_params];
        for g in self.gates.iter().rev() {
            match *g {
                Gate::Rx { qubit, param } => {
                    grad[param] += pauli_expectation_im(Pauli::X, qubit, &mu, &phi, self.n_qubits)
                }
                Gate::Ry { qubit, param } => {
                    grad[param] += pauli_expectation_im(Pauli::Y, qubit, &mu, &phi, self.n_qubits)
                }
                Gate::Rz { qubit, param } => {
                    grad[param] += pauli_expectation_im(Pauli::Z, qubit, &mu, &phi, self.n_qubits)
                }
                _ => {}
            }
            apply_gate(*g, angles, &mut phi, self.n_qubits, true);
            apply_gate(*g, angles, &mut mu, self.n_qubits, true);
        }
        Ok(grad)
    }

    /// Dense unitary, built column by column.
    pub fn unitary(&self, angles: &[f64]) -> Result<DMatrix<C64>> {
        let dim = 1 << self.n_qubits;
        let mut u = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut amps = vec![C64::new(0.0, 0.0); dim];
            amps[col] = C64::new(1.0, 0.0);
            self.apply(angles, &mut amps)?;
            for (row, a) in amps.into_iter().enumerate() {
                u[(row, col)] = a;
            }
        }
        Ok(u)
    }
}

#[derive(Clone, Copy)]
enum Pauli {
    X,
    Y,
    Z,
}

#[inline]
fn mask_for(qubit: usize, n_qubits: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

/// Visits every amplitude pair `(i, i|mask)` with bit `mask` clear in `i`.
#[inline]
fn for_pairs(amps_len: usize, mask: usize, mut f: impl FnMut(usize, usize)) {
    let mut base = 0;
    while base < amps_len {
        for i in base..base + mask {
            f(i, i | mask);
        }
        base += mask << 1;
    }
}

fn apply_gate(g: Gate, angles: &[f64], amps: &mut [C64], n_qubits: usize, inverse: bool) {
    let sign = if inverse { -1.0 } else { 1.0 };
    let len = amps.len();
    match g {
        Gate::Ry { qubit, param } => {
            let (s, c) = (0.5 * sign * angles[param]).sin_cos();
            for_pairs(len, mask_for(qubit, n_qubits), |i, j| {
                let (a0, a1) = (amps[i], amps[j]);
                amps[i] = a0 * c - a1 * s;
                amps[j] = a0 * s + a1 * c;
            });
        }
        Gate::Rz { qubit, param } => {
            let (s, c) = (0.5 * sign * angles[param]).sin_cos();
            let lo = C64::new(c, -s);
            let hi = C64::new(c, s);
            for_pairs(len, mask_for(qubit, n_qubits), |i, j| {
                amps[i] *= lo;
                amps[j] *= hi;
            });
        }
        Gate::Rx { qubit, param } => {
            let (s, c) = (0.5 * sign * angles[param]).sin_cos();
            let mis = C64::new(0.0, -s);
            for_pairs(len, mask_for(qubit, n_qubits), |i, j| {
                let (a0, a1) = (amps[i], amps[j]);
                amps[i] = a0 * c + a1 * mis;
                amps[j] = a0 * mis + a1 * c;
            });
        }
        Gate::Cnot { control, target } => {
            let cm = mask_for(control, n_qubits);
            for_pairs(len, mask_for(target, n_qubits), |i, j| {
                if i & cm != 0 {
                    amps.swap(i, j);
                }
            });
        }
        Gate::Cz { a, b } => {
            let both = mask_for(a, n_qubits) | mask_for(b, n_qubits);
            for (i, amp) in amps.iter_mut().enumerate() {
                if i & both == both {
                    *amp = -*amp;
                }
            }
        }
    }
}

/// `Im⟨mu|P_qubit|phi⟩`.
fn pauli_expectation_im(p: Pauli, qubit: usize, mu: &[C64], phi: &[C64], n_qubits: usize) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    let i_unit = C64::new(0.0, 1.0);
    for_pairs(phi.len(), mask_for(qubit, n_qubits), |i, j| {
        let (p0, p1) = match p {
            Pauli::X => (phi[j], phi[i]),
            Pauli::Y => (-i_unit * phi[j], i_unit * phi[i]),
            Pauli::Z => (phi[i], -phi[j]),
        };
        acc += mu[i].conj() * p0 + mu[j].conj() * p1;
    });
    acc.im
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        a.kronecker(b)
    }

    fn eye(n: usize) -> DMatrix<C64> {
        DMatrix::identity(n, n)
    }

    fn ry(t: f64) -> DMatrix<C64> {
        let (s, co) = (t / 2.0).sin_cos();
        DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
    }

    fn rz(t: f64) -> DMatrix<C64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::from_polar(1.0, -t / 2.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                C64::from_polar(1.0, t / 2.0),
            ],
        )
    }

    fn rx(t: f64) -> DMatrix<C64> {
        let (s, co) = (t / 2.0).sin_cos();
        DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
    }

    /// Embeds a one-qubit matrix at `q` (qubit 0 leftmost factor).
    fn embed1(g: &DMatrix<C64>, q: usize, n: usize) -> DMatrix<C64> {
        let mut out = eye(1);
        for p in 0..n {
            out = if p == q { kron(&out, g) } else { kron(&out, &eye(2)) };
        }
        out
    }

    fn cnot_dense(ctrl: usize, tgt: usize, n: usize) -> DMatrix<C64> {
        let dim = 1 << n;
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let cbit = (i >> (n - 1 - ctrl)) & 1;
            let j = if cbit == 1 { i ^ (1 << (n - 1 - tgt)) } else { i };
            m[(j, i)] = c(1.0, 0.0);
        }
        m
    }

    fn cz_dense(a: usize, b: usize, n: usize) -> DMatrix<C64> {
        let dim = 1 << n;
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let both = (i >> (n - 1 - a)) & 1 == 1 && (i >> (n - 1 - b)) & 1 == 1;
            m[(i, i)] = c(if both { -1.0 } else { 1.0 }, 0.0);
        }
        m
    }

    /// Builds the ansatz as a product of explicit Kronecker-embedded matrices.
    fn hea_dense(layout: &QubitLayout, angles: &[f64]) -> DMatrix<C64> {
        let n = layout.n_qubits();
        let mut u = eye(1 << n);
        for layer in 0..=layout.layers {
            if layer > 0 {
                for p in 0..n - 1 {
                    u = cnot_dense(p, p + 1, n) * u;
                }
            }
            for p in 0..n {
                let (y, z) = layout.angle_index(layer, p);
                let r = ry(angles[y]) * rz(angles[z]);
                u = embed1(&r, p, n) * u;
            }
        }
        u
    }

    #[test]
    fn zero_angles_fix_all_zero_state() {
        let layout = QubitLayout::new(2, 1, 3).unwrap();
        let circ = Circuit::hea(&layout);
        let out = circ.run_from_zero(&vec![0.0; layout.param_count()]).unwrap();
        assert!((out.amplitudes()[0] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn y_rotation_by_pi_flips_qubit() {
        let layout = QubitLayout::new(1, 0, 0).unwrap();
        let out = Circuit::hea(&layout).run_from_zero(&[PI, 0.0]).unwrap();
        assert!((out.amplitudes()[1].norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hea_matches_dense_matrix_product() {
        let layout = QubitLayout::new(2, 1, 2).unwrap();
        let mut r = rng::stream(11, 0);
        for _ in 0..5 {
            let angles: Vec<f64> = (0..layout.param_count()).map(|_| r.gen_range(-PI..PI)).collect();
            let u = Circuit::hea(&layout).unitary(&angles).unwrap();
            let oracle = hea_dense(&layout, &angles);
            assert!((u - oracle).norm() < 1e-12);
        }
    }

    #[test]
    fn impe_matches_dense_matrix_product() {
        let n = 2;
        let layers = 2;
        let mut r = rng::stream(12, 0);
        let angles: Vec<f64> = (0..2 * n * layers).map(|_| r.gen_range(-PI..PI)).collect();
        let mut oracle = eye(1 << n);
        for l in 0..layers {
            for p in 0..n {
                let base = l * 2 * n + 2 * p;
                let g = rx(angles[base + 1]) * ry(angles[base]);
                oracle = embed1(&g, p, n) * oracle;
            }
            oracle = cz_dense(0, 1, n) * oracle;
        }
        let u = Circuit::impe(n, layers).unitary(&angles).unwrap();
        assert!((u - oracle).norm() < 1e-12);
    }

    #[test]
    fn inverse_undoes_forward() {
        let layout = QubitLayout::new(3, 0, 2).unwrap();
        let circ = Circuit::hea(&layout);
        let mut r = rng::stream(13, 0);
        let angles: Vec<f64> = (0..layout.param_count()).map(|_| r.gen_range(-3.0..3.0)).collect();
        let mut amps = StateVector::zero(3).into_amplitudes();
        circ.apply(&angles, &mut amps).unwrap();
        circ.apply_inverse(&angles, &mut amps).unwrap();
        assert!((amps[0] - c(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn shape_errors() {
        let layout = QubitLayout::new(2, 0, 1).unwrap();
        let circ = Circuit::hea(&layout);
        assert!(circ.run_from_zero(&[0.0; 3]).is_err());
        let wrong = StateVector::zero(3);
        assert!(circ.run(&vec![0.0; layout.param_count()], &wrong).is_err());
    }
}
