use rayon::prelude::*;

use super::embed_cotangent;
use crate::netgen::{Generator, GeneratorGrads, Lmlp, NoLatentSample, NoLatentSpec, RdGenerator, Trainable};
use crate::otloss::{entropy_term, entropy_term_grad, wasserstein_cotangents, wasserstein_with_plan, Solver};
use crate::qcore::{partial_trace_ancilla, Circuit, DensityMatrix, QubitLayout, StateVector};
use crate::{Error, Result};

/// Loss value split into its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub wasserstein: f64,
    /// Batch mean of `Σ π log π` before scaling by λ.
    pub entropy: f64,
}

/// Generated states of a batch of angle vectors and `∂D_Wass/∂θ` for each.
#[derive(Debug, Clone)]
pub struct CircuitBatch {
    pub states: Vec<DensityMatrix>,
    pub d_theta: Vec<Vec<f64>>,
    pub wasserstein: f64,
}

/// Runs every angle vector through the ansatz, solves the transport problem
/// against `targets`, and pulls the loss back to the angles with the plan
/// held fixed.
pub fn circuit_batch_grad(
    layout: &QubitLayout,
    thetas: &[Vec<f64>],
    targets: &[DensityMatrix],
    solver: Solver,
) -> Result<CircuitBatch> {
    if thetas.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let circuit = Circuit::hea(layout);
    let zero = StateVector::zero(layout.n_qubits());
    let forward: Vec<(StateVector, DensityMatrix)> = thetas
        .par_iter()
        .map(|t| {
            let psi = circuit.run(t, &zero)?;
            let rho = partial_trace_ancilla(&psi, layout.n_anc)?;
            Ok((psi, rho))
        })
        .collect::<Result<_>>()?;
    let states: Vec<DensityMatrix> = forward.iter().map(|(_, r)| r.clone()).collect();
    let (_, sol) = wasserstein_with_plan(&states, targets, solver)?;
    let cot = wasserstein_cotangents(&states, targets, &sol.plan);
    let d_theta = forward
        .par_iter()
        .zip(&cot)
        .zip(thetas)
        .map(|(((psi, _), g), t)| {
            let lambda = embed_cotangent(g, psi.amplitudes(), layout.n_anc);
            circuit.vjp(t, psi.amplitudes(), &lambda)
        })
        .collect::<Result<_>>()?;
    Ok(CircuitBatch {
        states,
        d_theta,
        wasserstein: sol.cost,
    })
}

/// Sums per-sample gradient buffers in sample order.
fn reduce(parts: Vec<Vec<Vec<f64>>>, mut acc: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for p in parts {
        for (a, g) in acc.iter_mut().zip(p) {
            for (x, y) in a.iter_mut().zip(g) {
                *x += y;
            }
        }
    }
    acc
}

/// Loss and weight gradients of the latent mixture-of-experts generator on
/// one batch of latent draws.
pub fn lpqc_backward(
    generator: &Generator,
    zs: &[Vec<f64>],
    targets: &[DensityMatrix],
    lambda: f64,
    solver: Solver,
) -> Result<(LossParts, GeneratorGrads)> {
    let traces = zs
        .par_iter()
        .map(|z| generator.forward_trace(z))
        .collect::<Result<Vec<_>>>()?;
    let thetas: Vec<Vec<f64>> = traces.iter().map(|t| t.theta.clone()).collect();
    let batch = circuit_batch_grad(generator.layout(), &thetas, targets, solver)?;
    let pis: Vec<Vec<f64>> = traces.iter().map(|t| t.pi.clone()).collect();
    let entropy = if generator.n_experts() > 1 {
        entropy_term(&pis)
    } else {
        0.0
    };
    let b = zs.len();
    let per_sample: Vec<Vec<Vec<f64>>> = traces
        .par_iter()
        .zip(&batch.d_theta)
        .map(|(t, d)| {
            let mut g = generator.zero_grads();
            let extra: Vec<f64> = if lambda != 0.0 && generator.n_experts() > 1 {
                entropy_term_grad(&t.pi, b).iter().map(|x| lambda * x).collect()
            } else {
                Vec::new()
            };
            generator.backward(t, d, &extra, &mut g);
            g
        })
        .collect();
    let grads = reduce(per_sample, generator.zero_grads());
    Ok((
        LossParts {
            total: batch.wasserstein + lambda * entropy,
            wasserstein: batch.wasserstein,
            entropy,
        },
        grads,
    ))
}

/// No-latent baseline on pre-drawn reparameterized samples.
pub fn no_latent_backward(
    layout: &QubitLayout,
    spec: &NoLatentSpec,
    samples: &[NoLatentSample],
    targets: &[DensityMatrix],
    solver: Solver,
) -> Result<(LossParts, Vec<Vec<f64>>)> {
    let thetas: Vec<Vec<f64>> = samples.iter().map(|s| s.theta.clone()).collect();
    let batch = circuit_batch_grad(layout, &thetas, targets, solver)?;
    let mut grads = spec.zero_like();
    for (s, d) in samples.iter().zip(&batch.d_theta) {
        spec.backward(s, d, &mut grads);
    }
    Ok((parts(batch.wasserstein), grads))
}

/// Random-deterministic baseline on pre-drawn full angle vectors.
pub fn rd_backward(
    rd: &RdGenerator,
    thetas: &[Vec<f64>],
    targets: &[DensityMatrix],
    solver: Solver,
) -> Result<(LossParts, Vec<Vec<f64>>)> {
    let batch = circuit_batch_grad(rd.layout(), thetas, targets, solver)?;
    let mut grads = rd.zero_like();
    for d in &batch.d_theta {
        rd.backward(d, &mut grads);
    }
    Ok((parts(batch.wasserstein), grads))
}

/// Classical density-matrix baseline.
pub fn lmlp_backward(
    model: &Lmlp,
    zs: &[Vec<f64>],
    targets: &[DensityMatrix],
    solver: Solver,
) -> Result<(LossParts, Vec<Vec<f64>>)> {
    if zs.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let traces = zs
        .par_iter()
        .map(|z| model.forward_trace(z))
        .collect::<Result<Vec<_>>>()?;
    let states: Vec<DensityMatrix> = traces.iter().map(|t| t.rho.clone()).collect();
    let (_, sol) = wasserstein_with_plan(&states, targets, solver)?;
    let cot = wasserstein_cotangents(&states, targets, &sol.plan);
    let per_sample: Vec<Vec<Vec<f64>>> = traces
        .par_iter()
        .zip(&cot)
        .map(|(t, g)| {
            let mut grads = model.zero_like();
            model.backward(t, g, &mut grads);
            grads
        })
        .collect();
    Ok((parts(sol.cost), reduce(per_sample, model.zero_like())))
}

fn parts(w: f64) -> LossParts {
    LossParts {
        total: w,
        wasserstein: w,
        entropy: 0.0,
    }
}
