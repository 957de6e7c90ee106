use std::f64::consts::E;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, WeightedIndex};

use super::mlp::{Mlp, MlpSpec, MlpTrace};
use super::Trainable;
use crate::qcore::{DensityMatrix, QubitLayout, C64};
use crate::{rng, Error, Result};

/// No-latent baseline: angles drawn directly from a trainable diagonal
/// Gaussian, `θ = μ + exp(log σ) ⊙ ε` with `ε ~ N(0, I_K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoLatentSpec {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

/// One reparameterized draw.
#[derive(Debug, Clone)]
pub struct NoLatentSample {
    pub theta: Vec<f64>,
    pub eps: Vec<f64>,
}

impl NoLatentSpec {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Result<Self> {
        if mean.len() != log_std.len() {
            return Err(Error::shape("log_std length", mean.len(), log_std.len()));
        }
        if mean.iter().chain(&log_std).any(|v| !v.is_finite()) {
            return Err(Error::Config("no-latent parameters must be finite".into()));
        }
        Ok(NoLatentSpec { mean, log_std })
    }

    /// `N(0, I)` over `K` angles.
    pub fn standard(k: usize) -> Self {
        NoLatentSpec {
            mean: vec![0.0; k],
            log_std: vec![0.0; k],
        }
    }

    pub fn draw(&self, r: &mut rng::Rng) -> NoLatentSample {
        let eps: Vec<f64> = (0..self.mean.len()).map(|_| r.sample(StandardNormal)).collect();
        let theta = self
            .mean
            .iter()
            .zip(&self.log_std)
            .zip(&eps)
            .map(|((m, s), e)| m + s.exp() * e)
            .collect();
        NoLatentSample { theta, eps }
    }

    /// Pulls `∂L/∂θ` of one draw back onto `(μ, log σ)`.
    pub fn backward(&self, sample: &NoLatentSample, d_theta: &[f64], grads: &mut [Vec<f64>]) {
        for k in 0..self.mean.len() {
            grads[0][k] += d_theta[k];
            grads[1][k] += d_theta[k] * self.log_std[k].exp() * sample.eps[k];
        }
    }
}

impl Trainable for NoLatentSpec {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.mean, &self.log_std]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.mean, &mut self.log_std]
    }
}

pub fn sample_no_latent(spec: &NoLatentSpec, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, 0);
    (0..count).map(|_| spec.draw(&mut r).theta).collect()
}

/// Random-deterministic baseline. Layer 0 and the first `L/2` entangling
/// layers take frozen per-sample angles from an `M`-mode Gaussian mixture
/// (component scale `e⁻¹`, centers `~ N(0, I)`); the last `L/2` layers share
/// one trainable angle block.
#[derive(Debug, Clone, PartialEq)]
pub struct RdGenerator {
    layout: QubitLayout,
    centers: Vec<Vec<f64>>,
    pub trainable: Vec<f64>,
}

impl RdGenerator {
    pub fn new(layout: QubitLayout, modes: usize, seed: u64) -> Result<Self> {
        if layout.layers % 2 != 0 {
            return Err(Error::Config(format!(
                "random-deterministic baseline needs an even layer count, got {}",
                layout.layers
            )));
        }
        if modes == 0 {
            return Err(Error::Config("mixture needs at least one mode".into()));
        }
        let n_rand = Self::random_len(&layout);
        let n_train = layout.param_count() - n_rand;
        let mut r = rng::stream(seed, 2);
        let centers = (0..modes)
            .map(|_| (0..n_rand).map(|_| r.sample(StandardNormal)).collect())
            .collect();
        Ok(RdGenerator {
            layout,
            centers,
            trainable: vec![0.0; n_train],
        })
    }

    fn random_len(layout: &QubitLayout) -> usize {
        layout.params_per_layer() * (layout.layers / 2 + 1)
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    pub fn random_block_len(&self) -> usize {
        Self::random_len(&self.layout)
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn from_parts(layout: QubitLayout, centers: Vec<Vec<f64>>, trainable: Vec<f64>) -> Result<Self> {
        let n_rand = Self::random_len(&layout);
        if layout.layers % 2 != 0 || centers.is_empty() || centers.iter().any(|c| c.len() != n_rand) {
            return Err(Error::Config("random-deterministic shape mismatch".into()));
        }
        if trainable.len() != layout.param_count() - n_rand {
            return Err(Error::shape(
                "trainable block",
                layout.param_count() - n_rand,
                trainable.len(),
            ));
        }
        Ok(RdGenerator {
            layout,
            centers,
            trainable,
        })
    }

    /// One full angle vector: fresh random block followed by the trainable block.
    pub fn draw(&self, r: &mut rng::Rng) -> Vec<f64> {
        let m = self.centers.len();
        let mode = if m == 1 {
            0
        } else {
            WeightedIndex::new(vec![1.0; m]).expect("uniform weights").sample(r)
        };
        let scale = 1.0 / E;
        let mut theta: Vec<f64> = self.centers[mode]
            .iter()
            .map(|c| c + scale * r.sample::<f64, _>(StandardNormal))
            .collect();
        theta.extend_from_slice(&self.trainable);
        theta
    }

    pub fn sample(&self, seed: u64, count: usize) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, 0);
        (0..count).map(|_| self.draw(&mut r)).collect()
    }

    pub fn backward(&self, d_theta: &[f64], grads: &mut [Vec<f64>]) {
        let off = self.random_block_len();
        for (g, d) in grads[0].iter_mut().zip(&d_theta[off..]) {
            *g += d;
        }
    }
}

impl Trainable for RdGenerator {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.trainable]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.trainable]
    }
}

/// Output interpretation of the classical density-matrix baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmlpVariant {
    /// `2·4ⁿ` outputs read as a complex matrix `A` (real parts then
    /// imaginary parts, row-major); `ρ = AA†/tr(AA†)`.
    Mixed,
    /// `2·2ⁿ` outputs read as a complex vector, normalized to a pure state.
    Pure,
}

impl LmlpVariant {
    /// Mixed exactly when the target ensemble comes from ancilla-traced states.
    pub fn for_ancillas(n_anc: usize) -> Self {
        if n_anc > 0 {
            LmlpVariant::Mixed
        } else {
            LmlpVariant::Pure
        }
    }

    pub fn output_dim(self, n_data: usize) -> usize {
        match self {
            LmlpVariant::Mixed => 2 << (2 * n_data),
            LmlpVariant::Pure => 2 << n_data,
        }
    }
}

/// Classical MLP that emits density matrices directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Lmlp {
    pub mlp: Mlp,
    pub variant: LmlpVariant,
    pub n_data: usize,
}

/// Forward values kept for [`Lmlp::backward`].
#[derive(Debug, Clone)]
pub struct LmlpTrace {
    mlp: MlpTrace,
    pub rho: DensityMatrix,
}

const DEGENERATE_TRACE: f64 = 1e-12;

impl Lmlp {
    pub fn new(mlp: Mlp, variant: LmlpVariant, n_data: usize) -> Result<Self> {
        let want = variant.output_dim(n_data);
        if mlp.spec().d_out != want {
            return Err(Error::shape("lmlp output", want, mlp.spec().d_out));
        }
        Ok(Lmlp { mlp, variant, n_data })
    }

    pub fn glorot(spec: MlpSpec, variant: LmlpVariant, n_data: usize, r: &mut rng::Rng) -> Result<Self> {
        Self::new(Mlp::glorot(spec, r), variant, n_data)
    }

    pub fn state(&self, z: &[f64]) -> Result<DensityMatrix> {
        Ok(self.forward_trace(z)?.rho)
    }

    pub fn forward_trace(&self, z: &[f64]) -> Result<LmlpTrace> {
        let t = self.mlp.forward_trace(z)?;
        let rho = output_to_state(&t.output, self.variant, self.n_data)?;
        Ok(LmlpTrace { mlp: t, rho })
    }

    /// Backpropagates a Hermitian cotangent `G` (`dL = tr(G dρ)`).
    pub fn backward(&self, trace: &LmlpTrace, g: &DMatrix<C64>, grads: &mut [Vec<f64>]) {
        let d = 1usize << self.n_data;
        let out = &trace.mlp.output;
        let rho = trace.rho.matrix();
        let c: f64 = crate::qcore::trace_product(g, rho);
        let mut d_out = vec![0.0; out.len()];
        match self.variant {
            LmlpVariant::Mixed => {
                let a = DMatrix::from_fn(d, d, |i, j| C64::new(out[i * d + j], out[d * d + i * d + j]));
                let t: f64 = a.iter().map(|x| x.norm_sqr()).sum();
                // dL = 2 Re tr(M dA), M = (A†G − c A†)/t
                let ad = a.adjoint();
                let m = (&ad * g - &ad * C64::new(c, 0.0)) / C64::new(t, 0.0);
                for i in 0..d {
                    for j in 0..d {
                        let mji = m[(j, i)];
                        d_out[i * d + j] = 2.0 * mji.re;
                        d_out[d * d + i * d + j] = -2.0 * mji.im;
                    }
                }
            }
            LmlpVariant::Pure => {
                let v: Vec<C64> = (0..d).map(|i| C64::new(out[i], out[d + i])).collect();
                let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                let psi: Vec<C64> = v.iter().map(|x| x / norm).collect();
                for i in 0..d {
                    let gpsi: C64 = (0..d).map(|j| g[(i, j)] * psi[j]).sum();
                    let lam = (gpsi - psi[i] * c) / norm;
                    d_out[i] = 2.0 * lam.re;
                    d_out[d + i] = 2.0 * lam.im;
                }
            }
        }
        self.mlp.backward(&trace.mlp, &d_out, &mut grads[0]);
    }
}

impl Trainable for Lmlp {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.mlp.params()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.mlp.params_mut()]
    }
}

/// Maps raw network output to a density matrix.
pub fn output_to_state(out: &[f64], variant: LmlpVariant, n_data: usize) -> Result<DensityMatrix> {
    let want = variant.output_dim(n_data);
    if out.len() != want {
        return Err(Error::shape("lmlp output", want, out.len()));
    }
    let d = 1usize << n_data;
    let m = match variant {
        LmlpVariant::Mixed => {
            let a = DMatrix::from_fn(d, d, |i, j| C64::new(out[i * d + j], out[d * d + i * d + j]));
            let aa = &a * a.adjoint();
            let t = aa.trace().re;
            if t < DEGENERATE_TRACE {
                return Err(Error::Degenerate(format!("tr(AA†) = {t}")));
            }
            let mut m = aa / C64::new(t, 0.0);
            // exact hermiticity
            for i in 0..d {
                m[(i, i)].im = 0.0;
                for j in i + 1..d {
                    m[(j, i)] = m[(i, j)].conj();
                }
            }
            m
        }
        LmlpVariant::Pure => {
            let v: Vec<C64> = (0..d).map(|i| C64::new(out[i], out[d + i])).collect();
            let t: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            if t < DEGENERATE_TRACE {
                return Err(Error::Degenerate(format!("output norm² = {t}")));
            }
            DMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj() / t)
        }
    };
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::Activation;

    #[test]
    fn no_latent_limits_and_moments() {
        let spec = NoLatentSpec::new(vec![0.5; 3], vec![-20.0; 3]).unwrap();
        for t in sample_no_latent(&spec, 1, 10) {
            assert!(t.iter().all(|v| (v - 0.5).abs() < 1e-8));
        }
        let spec = NoLatentSpec::standard(2);
        let xs = sample_no_latent(&spec, 2, 100_000);
        for k in 0..2 {
            let var = xs.iter().map(|t| t[k] * t[k]).sum::<f64>() / xs.len() as f64;
            assert!((var - 1.0).abs() < 0.05);
        }
        assert_eq!(sample_no_latent(&spec, 3, 5), sample_no_latent(&spec, 3, 5));
    }

    #[test]
    fn rd_blocks() {
        let layout = QubitLayout::new(2, 0, 4).unwrap();
        let rd = RdGenerator::new(layout, 1, 7).unwrap();
        let split = rd.random_block_len();
        assert_eq!(split, 4 * 3);
        let draws = rd.sample(1, 2);
        assert!(draws.iter().all(|t| t[split..].iter().all(|&v| v == 0.0)));
        assert_eq!(draws[0][split..], draws[1][split..]);
        assert_ne!(draws[0][..split], draws[1][..split]);
        let odd = QubitLayout::new(2, 0, 3).unwrap();
        assert!(RdGenerator::new(odd, 1, 0).is_err());
    }

    #[test]
    fn rd_single_mode_variance() {
        let layout = QubitLayout::new(1, 0, 2).unwrap();
        let rd = RdGenerator::new(layout, 1, 3).unwrap();
        let draws = rd.sample(4, 100_000);
        let c = &rd.centers()[0];
        for k in 0..rd.random_block_len() {
            let var = draws.iter().map(|t| (t[k] - c[k]).powi(2)).sum::<f64>() / draws.len() as f64;
            assert!((var - (-2.0f64).exp()).abs() < 0.005, "{var}");
        }
    }

    #[test]
    fn lmlp_examples() {
        let mut e1 = vec![0.0; 4];
        e1[0] = 1.0;
        let rho = output_to_state(&e1, LmlpVariant::Pure, 1).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);

        let mut id = vec![0.0; 8];
        id[0] = 1.0;
        id[3] = 1.0;
        let rho = output_to_state(&id, LmlpVariant::Mixed, 1).unwrap();
        assert!((rho.matrix() - DensityMatrix::maximally_mixed(1).matrix()).norm() < 1e-15);

        let mut r = rng::stream(8, 0);
        let out: Vec<f64> = (0..32).map(|_| r.gen_range(-1.0..1.0)).collect();
        output_to_state(&out, LmlpVariant::Mixed, 2)
            .unwrap()
            .validate()
            .unwrap();

        assert!(matches!(
            output_to_state(&[0.0; 8], LmlpVariant::Mixed, 1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn output_dimension_accounting() {
        assert_eq!(LmlpVariant::Mixed.output_dim(8), 1 << 17);
        let layout = QubitLayout::new(8, 2, 10).unwrap();
        let ratio_full = (1u64 << 17) as f64 / layout.param_count() as f64;
        assert!((ratio_full - 131072.0 / 220.0).abs() < 1e-12);
        assert!((ratio_full - 595.78).abs() < 0.01);
        let lpqc_count_without_first_layer = 2 * layout.layers * layout.n_qubits();
        assert!(((1u64 << 17) as f64 / lpqc_count_without_first_layer as f64 - 655.36).abs() < 1e-12);
    }

    #[test]
    fn lmlp_backward_matches_finite_differences() {
        for (variant, n) in [(LmlpVariant::Mixed, 1), (LmlpVariant::Pure, 2)] {
            let spec = MlpSpec {
                d_in: 2,
                hidden: 3,
                depth: 1,
                d_out: variant.output_dim(n),
                activation: Activation::Tanh,
            };
            let mut r = rng::stream(9, 0);
            let model = Lmlp::glorot(spec, variant, n, &mut r).unwrap();
            let d = 1 << n;
            let hraw = DMatrix::from_fn(d, d, |i, j| {
                C64::new((i + 2 * j) as f64 * 0.3 - 0.4, (i as f64 - j as f64) * 0.2)
            });
            let g = (&hraw + hraw.adjoint()) * C64::new(0.5, 0.0);
            let z = [0.4, -0.8];
            let loss = |m: &Lmlp| crate::qcore::trace_product(&g, m.state(&z).unwrap().matrix());
            let trace = model.forward_trace(&z).unwrap();
            let mut grads = vec![vec![0.0; spec.param_count()]];
            model.backward(&trace, &g, &mut grads);
            let h = 1e-6;
            for k in 0..spec.param_count() {
                let mut p = model.clone();
                p.mlp.params_mut()[k] += h;
                let mut m = model.clone();
                m.mlp.params_mut()[k] -= h;
                let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                assert!(
                    (grads[0][k] - fd).abs() < 1e-6,
                    "{variant:?} {k}: {} vs {fd}",
                    grads[0][k]
                );
            }
        }
    }
}
