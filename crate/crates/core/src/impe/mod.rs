//! Projected-ensemble baseline: each cycle applies a trainable circuit to
//! `data ⊗ |0…0⟩_aux`, measures the auxiliary register, and keeps the
//! renormalized data branch. Cycles are trained one at a time and frozen.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grad::{adam_step, AdamState};
use crate::netgen::Trainable;
use crate::otloss::{wasserstein_cotangents, wasserstein_with_plan, Solver};
use crate::qcore::{partial_trace_ancilla, Circuit, DensityMatrix, StateVector, C64};
use crate::{rng, Error, Result};

/// Branches less likely than this are never selected.
pub const MIN_BRANCH_PROB: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpeConfig {
    pub n_data: usize,
    pub n_aux: usize,
    /// Circuit layers per cycle.
    pub layers: usize,
    pub cycles: usize,
    pub batch: usize,
    pub epochs_per_cycle: usize,
    pub lr: f64,
    /// Standard deviation of the initial cycle angles.
    pub init_scale: f64,
    /// Generated ensemble size; the training set size when `None`.
    pub ensemble_size: Option<usize>,
    /// Epochs between evaluations for best-iterate selection.
    pub eval_stride: usize,
}

impl ImpeConfig {
    pub fn new(n_data: usize, n_aux: usize, layers: usize, cycles: usize) -> Self {
        ImpeConfig {
            n_data,
            n_aux,
            layers,
            cycles,
            batch: 100,
            epochs_per_cycle: 100 * layers,
            lr: 0.01,
            init_scale: 0.1,
            ensemble_size: None,
            eval_stride: 1,
        }
    }

    /// `T = 200 / L` cycles of `100·L` epochs on 7 data and 3 auxiliary qubits.
    pub fn paper(layers: usize) -> Self {
        Self::new(7, 3, layers, (200 / layers).max(1))
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs_per_cycle * self.cycles
    }

    pub fn params_per_cycle(&self) -> usize {
        2 * (self.n_data + self.n_aux) * self.layers
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_data == 0 || self.n_aux == 0 || self.layers == 0 || self.cycles == 0 {
            return Err(Error::Config("qubit counts, layers and cycles must be positive".into()));
        }
        if self.batch == 0 || self.epochs_per_cycle == 0 || self.eval_stride == 0 {
            return Err(Error::Config("batch, epochs and eval stride must be positive".into()));
        }
        if !(self.lr > 0.0) || !(self.init_scale >= 0.0) {
            return Err(Error::Config(
                "learning rate must be positive and init scale non-negative".into(),
            ));
        }
        if self.n_data + self.n_aux > 20 {
            return Err(Error::Config("too many qubits".into()));
        }
        Ok(())
    }

    pub fn circuit(&self) -> Circuit {
        Circuit::impe(self.n_data + self.n_aux, self.layers)
    }
}

/// `V(ζ)|ψ⟩`.
pub fn impe_circuit(zeta: &[f64], state: &StateVector, layers: usize) -> Result<StateVector> {
    Circuit::impe(state.n_qubits(), layers).run(zeta, state)
}

/// Unnormalized data branch for auxiliary outcome `z` and its probability.
pub fn measurement_branch(state: &StateVector, n_aux: usize, z: usize) -> (Vec<C64>, f64) {
    let block = 1usize << n_aux;
    let chi: Vec<C64> = state.amplitudes().iter().skip(z).step_by(block).copied().collect();
    let p = chi.iter().map(|a| a.norm_sqr()).sum();
    (chi, p)
}

/// Born probabilities of every auxiliary outcome.
pub fn outcome_probabilities(state: &StateVector, n_aux: usize) -> Vec<f64> {
    let block = 1usize << n_aux;
    let mut p = vec![0.0; block];
    for (i, a) in state.amplitudes().iter().enumerate() {
        p[i % block] += a.norm_sqr();
    }
    p
}

/// Samples an auxiliary outcome by the Born rule and returns the
/// renormalized data state with the outcome.
pub fn impe_measure_update(state: &StateVector, n_aux: usize, r: &mut rng::Rng) -> Result<(StateVector, usize)> {
    if n_aux >= state.n_qubits() {
        return Err(Error::Config(
            "auxiliary register must leave at least one data qubit".into(),
        ));
    }
    let probs = outcome_probabilities(state, n_aux);
    for _ in 0..64 {
        let u: f64 = r.gen::<f64>() * probs.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut z = probs.len() - 1;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                z = k;
                break;
            }
        }
        if probs[z] < MIN_BRANCH_PROB {
            continue;
        }
        let (chi, _) = measurement_branch(state, n_aux, z);
        return Ok((StateVector::normalized(chi)?, z));
    }
    Err(Error::Degenerate("could not sample a supported outcome".into()))
}

/// Outcome-averaged post-measurement data state; equals the partial trace
/// over the auxiliary register.
pub fn branch_average(state: &StateVector, n_aux: usize) -> DensityMatrix {
    let d = 1usize << (state.n_qubits() - n_aux);
    let mut m = nalgebra::DMatrix::<C64>::zeros(d, d);
    for z in 0..1usize << n_aux {
        let (chi, p) = measurement_branch(state, n_aux, z);
        if p < MIN_BRANCH_PROB {
            continue;
        }
        // p · |φ⟩⟨φ| = |χ⟩⟨χ|
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += chi[i] * chi[j].conj();
            }
        }
    }
    DensityMatrix::from_matrix_unchecked(m)
}

/// `|ψ⟩ ⊗ |0…0⟩_aux`.
fn with_aux(psi: &StateVector, n_aux: usize) -> StateVector {
    psi.tensor(&StateVector::zero(n_aux))
}

/// Random product of single-qubit Haar states.
pub fn haar_product_state(n: usize, r: &mut rng::Rng) -> StateVector {
    let mut s = StateVector::haar(1, r);
    for _ in 1..n {
        s = s.tensor(&StateVector::haar(1, r));
    }
    s
}

/// One cycle applied to every member, outcomes drawn from `seed`
/// (one stream per member).
pub fn cycle_update(cfg: &ImpeConfig, zeta: &[f64], states: &[StateVector], seed: u64) -> Result<Vec<StateVector>> {
    let circuit = cfg.circuit();
    states
        .par_iter()
        .enumerate()
        .map(|(j, psi)| {
            let out = circuit.run(zeta, &with_aux(psi, cfg.n_aux))?;
            let mut r = rng::stream(seed, j as u64);
            Ok(impe_measure_update(&out, cfg.n_aux, &mut r)?.0)
        })
        .collect()
}

fn to_density(states: &[StateVector]) -> Vec<DensityMatrix> {
    states.iter().map(DensityMatrix::pure).collect()
}

/// Loss and fixed-outcome gradient on one batch.
pub fn batch_loss_grad(
    cfg: &ImpeConfig,
    zeta: &[f64],
    inputs: &[StateVector],
    targets: &[DensityMatrix],
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let circuit = cfg.circuit();
    let fwd: Vec<(StateVector, usize, f64, StateVector)> = inputs
        .par_iter()
        .enumerate()
        .map(|(j, psi)| {
            let out = circuit.run(zeta, &with_aux(psi, cfg.n_aux))?;
            let mut r = rng::stream(seed, j as u64);
            let (phi, z) = impe_measure_update(&out, cfg.n_aux, &mut r)?;
            let (_, p) = measurement_branch(&out, cfg.n_aux, z);
            Ok((out, z, p.sqrt(), phi))
        })
        .collect::<Result<_>>()?;
    let generated: Vec<DensityMatrix> = fwd.iter().map(|f| DensityMatrix::pure(&f.3)).collect();
    let (_, sol) = wasserstein_with_plan(&generated, targets, Solver::Exact)?;
    let cot = wasserstein_cotangents(&generated, targets, &sol.plan);
    let block = 1usize << cfg.n_aux;
    let grads: Vec<Vec<f64>> = fwd
        .par_iter()
        .zip(&cot)
        .map(|((out, z, norm, phi), g)| {
            let phi = phi.amplitudes();
            let d = phi.len();
            let gphi: Vec<C64> = (0..d).map(|i| (0..d).map(|k| g[(i, k)] * phi[k]).sum()).collect();
            let e: f64 = (0..d).map(|i| (phi[i].conj() * gphi[i]).re).sum();
            let mut lambda = vec![C64::new(0.0, 0.0); out.dim()];
            for i in 0..d {
                lambda[i * block + z] = (gphi[i] - phi[i] * e) / *norm;
            }
            circuit.vjp(zeta, out.amplitudes(), &lambda)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; zeta.len()];
    for g in grads {
        for (t, x) in total.iter_mut().zip(g) {
            *t += x;
        }
    }
    Ok((sol.cost, total))
}

struct Angles(Vec<f64>);

impl Trainable for Angles {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.0]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleLog {
    /// Evaluation loss of the cycle's initial angles.
    pub initial: f64,
    /// Evaluation loss of the kept angles.
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ImpeResult {
    pub zetas: Vec<Vec<f64>>,
    /// `D_Wass(S, S̃₀)`.
    pub start_loss: f64,
    pub cycles: Vec<CycleLog>,
    pub ensemble: Vec<StateVector>,
}

impl ImpeResult {
    pub fn final_loss(&self) -> f64 {
        self.cycles.last().map_or(self.start_loss, |c| c.final_loss)
    }
}

/// Trains `T` cycles in sequence against pure training states.
pub fn impe_train(cfg: &ImpeConfig, training: &[StateVector], seed: u64) -> Result<ImpeResult> {
    cfg.validate()?;
    if training.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    if let Some(s) = training.iter().find(|s| s.n_qubits() != cfg.n_data) {
        return Err(Error::shape("training state qubits", cfg.n_data, s.n_qubits()));
    }
    let targets = to_density(training);
    let pool_size = cfg.ensemble_size.unwrap_or(training.len());
    let mut r = rng::stream(seed, 0);
    let mut pool: Vec<StateVector> = (0..pool_size).map(|_| haar_product_state(cfg.n_data, &mut r)).collect();
    let start_loss = wasserstein_with_plan(&to_density(&pool), &targets, Solver::Exact)?
        .1
        .cost;
    let k = cfg.params_per_cycle();
    let normal = Normal::new(0.0, cfg.init_scale.max(f64::MIN_POSITIVE)).expect("valid scale");
    let mut zetas = Vec::with_capacity(cfg.cycles);
    let mut logs = Vec::with_capacity(cfg.cycles);
    for t in 0..cfg.cycles {
        let mut init_rng = rng::stream(rng::derive_seed(&[seed, t as u64]), 1);
        let mut zeta = Angles(
            (0..k)
                .map(|_| {
                    if cfg.init_scale == 0.0 {
                        0.0
                    } else {
                        normal.sample(&mut init_rng)
                    }
                })
                .collect(),
        );
        let eval_seed = rng::derive_seed(&[seed, t as u64, u64::MAX]);
        let evaluate = |z: &[f64]| -> Result<(f64, Vec<StateVector>)> {
            let next = cycle_update(cfg, z, &pool, eval_seed)?;
            let loss = wasserstein_with_plan(&to_density(&next), &targets, Solver::Exact)?
                .1
                .cost;
            Ok((loss, next))
        };
        let (initial, mut best_next) = evaluate(&zeta.0)?;
        let mut best = (initial, zeta.0.clone());
        let mut adam = AdamState::new(&zeta, cfg.lr);
        let mut epoch_losses = Vec::with_capacity(cfg.epochs_per_cycle);
        for e in 0..cfg.epochs_per_cycle {
            let epoch_seed = rng::derive_seed(&[seed, t as u64, e as u64]);
            let mut er = rng::stream(epoch_seed, 0);
            let inputs: Vec<StateVector> = pick(&pool, cfg.batch, &mut er);
            let batch_targets: Vec<DensityMatrix> = pick(&targets, cfg.batch, &mut er);
            let (loss, g) = batch_loss_grad(cfg, &zeta.0, &inputs, &batch_targets, epoch_seed)?;
            epoch_losses.push(loss);
            adam_step(&mut adam, &mut zeta, &[g])?;
            if (e + 1) % cfg.eval_stride == 0 || e + 1 == cfg.epochs_per_cycle {
                let (l, next) = evaluate(&zeta.0)?;
                if l < best.0 {
                    best = (l, zeta.0.clone());
                    best_next = next;
                }
            }
        }
        pool = best_next;
        logs.push(CycleLog {
            initial,
            final_loss: best.0,
            epoch_losses,
        });
        zetas.push(best.1);
    }
    Ok(ImpeResult {
        zetas,
        start_loss,
        cycles: logs,
        ensemble: pool,
    })
}

/// A random subset of `count` members (all of them, in order, when the
/// set is no larger).
fn pick<T: Clone>(items: &[T], count: usize, r: &mut rng::Rng) -> Vec<T> {
    if count >= items.len() {
        return items.to_vec();
    }
    let mut idx = sample_indices(r, items.len(), count).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].clone()).collect()
}

/// `Tr_aux[V|ψ⊗0⟩⟨ψ⊗0|V†]`.
pub fn cycle_channel(cfg: &ImpeConfig, zeta: &[f64], psi: &StateVector) -> Result<DensityMatrix> {
    let out = cfg.circuit().run(zeta, &with_aux(psi, cfg.n_aux))?;
    partial_trace_ancilla(&out, cfg.n_aux)
}
