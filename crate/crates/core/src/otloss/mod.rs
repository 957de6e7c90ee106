//! Super-fidelity cost matrices, exact and entropic optimal transport, and
//! the Wasserstein training loss with its mixture-entropy regularizer.

mod exact;
mod sinkhorn;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::qcore::{purity, trace_product, DensityMatrix, C64};
use crate::{Error, Result};

pub use exact::{hungarian, transport_simplex};

/// `Cᵢⱼ = 1 − κ(ρᵢ, σⱼ)`.
pub type CostMatrix = DMatrix<f64>;

/// Histograms must agree in mass to this tolerance.
pub const MARGINAL_TOL: f64 = 1e-8;

/// A coupling between two histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub p: DMatrix<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TransportPlan {
    /// Largest absolute deviation of a row or column sum from its marginal.
    pub fn marginal_violation(&self) -> f64 {
        let rows = (0..self.p.nrows()).map(|i| (self.p.row(i).sum() - self.a[i]).abs());
        let cols = (0..self.p.ncols()).map(|j| (self.p.column(j).sum() - self.b[j]).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.p.iter().all(|&x| x >= 0.0) && self.marginal_violation() <= tol
    }

    pub fn cost(&self, c: &CostMatrix) -> f64 {
        self.p.component_mul(c).sum()
    }
}

/// Solver output. `converged` is always true for the exact solver.
#[derive(Debug, Clone)]
pub struct OtSolution {
    pub plan: TransportPlan,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    Exact,
    Sinkhorn { epsilon: f64, max_iters: usize, tol: f64 },
}

pub fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Elementwise `1 − κ`, clamped below at 0. Rows are computed in parallel.
pub fn cost_matrix(x: &[DensityMatrix], y: &[DensityMatrix]) -> Result<CostMatrix> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Config("cost matrix needs nonempty ensembles".into()));
    }
    let d = x[0].dim();
    if let Some(bad) = x.iter().chain(y).find(|r| r.dim() != d) {
        return Err(Error::shape("density matrix dimension", d, bad.dim()));
    }
    let py: Vec<f64> = y.iter().map(purity).collect();
    let rows: Vec<Vec<f64>> = x
        .par_iter()
        .map(|rho| {
            let pr = purity(rho);
            y.iter()
                .zip(&py)
                .map(|(sigma, &ps)| {
                    let k =
                        crate::qcore::super_fidelity_from_parts(trace_product(rho.matrix(), sigma.matrix()), pr, ps);
                    (1.0 - k).max(0.0)
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(x.len(), y.len(), |i, j| rows[i][j]))
}

fn check_histograms(c: &CostMatrix, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != c.nrows() {
        return Err(Error::shape("row marginal", c.nrows(), a.len()));
    }
    if b.len() != c.ncols() {
        return Err(Error::shape("column marginal", c.ncols(), b.len()));
    }
    if a.iter().chain(b).any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::Histogram("weights must be finite and non-negative".into()));
    }
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    if (sa - sb).abs() > MARGINAL_TOL {
        return Err(Error::Histogram(format!("marginal masses differ: {sa} vs {sb}")));
    }
    if sa <= 0.0 {
        return Err(Error::Histogram("marginals carry no mass".into()));
    }
    Ok(())
}

fn is_uniform(w: &[f64]) -> bool {
    w.iter().all(|&x| (x - w[0]).abs() <= 1e-15 * w[0].abs().max(1.0))
}

/// Exact optimal plan. Square problems with uniform marginals go through
/// the assignment solver; everything else through the transportation simplex.
pub fn ot_exact(c: &CostMatrix, a: &[f64], b: &[f64]) -> Result<OtSolution> {
    check_histograms(c, a, b)?;
    let (m, n) = c.shape();
    let p = if m == n && is_uniform(a) && is_uniform(b) {
        let col = hungarian(c);
        let mut p = DMatrix::zeros(n, n);
        for (i, &j) in col.iter().enumerate() {
            p[(i, j)] = a[i];
        }
        p
    } else {
        transport_simplex(c, a, b)
    };
    let plan = TransportPlan {
        p,
        a: a.to_vec(),
        b: b.to_vec(),
    };
    Ok(OtSolution {
        cost: plan.cost(c),
        plan,
        converged: true,
        iterations: 0,
    })
}

/// Entropic plan by log-domain alternating scaling. The reported cost is the
/// unregularized `Σ Pᵢⱼ Cᵢⱼ`; running out of iterations clears `converged`
/// instead of failing.
pub fn ot_sinkhorn(
    c: &CostMatrix,
    a: &[f64],
    b: &[f64],
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> Result<OtSolution> {
    check_histograms(c, a, b)?;
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let (p, iterations, converged) = sinkhorn::sinkhorn_log(c, a, b, epsilon, max_iters, tol);
    let plan = TransportPlan {
        p,
        a: a.to_vec(),
        b: b.to_vec(),
    };
    Ok(OtSolution {
        cost: plan.cost(c),
        plan,
        converged,
        iterations,
    })
}

pub fn solve(c: &CostMatrix, a: &[f64], b: &[f64], solver: Solver) -> Result<OtSolution> {
    match solver {
        Solver::Exact => ot_exact(c, a, b),
        Solver::Sinkhorn {
            epsilon,
            max_iters,
            tol,
        } => ot_sinkhorn(c, a, b, epsilon, max_iters, tol),
    }
}

/// Cost matrix and optimal plan under uniform histograms.
pub fn wasserstein_with_plan(
    x: &[DensityMatrix],
    y: &[DensityMatrix],
    solver: Solver,
) -> Result<(CostMatrix, OtSolution)> {
    let c = cost_matrix(x, y)?;
    let sol = solve(&c, &uniform(x.len()), &uniform(y.len()), solver)?;
    Ok((c, sol))
}

/// `D_Wass(X, Y)` with uniform histograms and the exact solver.
pub fn wasserstein_loss(x: &[DensityMatrix], y: &[DensityMatrix]) -> Result<f64> {
    Ok(wasserstein_with_plan(x, y, Solver::Exact)?.1.cost)
}

/// Batch mean of `Σᵢ πᵢ log πᵢ` (with `0 log 0 = 0`).
pub fn entropy_term(gate_probs: &[Vec<f64>]) -> f64 {
    if gate_probs.is_empty() {
        return 0.0;
    }
    let total: f64 = gate_probs
        .iter()
        .map(|pi| pi.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>())
        .sum();
    total / gate_probs.len() as f64
}

/// `∂(entropy_term)/∂πᵢ` for one sample of a batch of `batch` samples.
pub fn entropy_term_grad(pi: &[f64], batch: usize) -> Vec<f64> {
    pi.iter()
        .map(|&p| (p.max(f64::MIN_POSITIVE).ln() + 1.0) / batch as f64)
        .collect()
}

/// `D_Wass + λ · mean Σ π log π`.
pub fn train_loss(x: &[DensityMatrix], y: &[DensityMatrix], gate_probs: &[Vec<f64>], lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be non-negative, got {lambda}")));
    }
    let d = wasserstein_loss(x, y)?;
    Ok(if lambda == 0.0 {
        d
    } else {
        d + lambda * entropy_term(gate_probs)
    })
}

/// Cotangents `Gᵢ = ∂D/∂ρᵢ = −Σⱼ Pᵢⱼ ∂κ(ρᵢ,σⱼ)/∂ρᵢ` with the plan held fixed.
pub fn wasserstein_cotangents(x: &[DensityMatrix], y: &[DensityMatrix], plan: &TransportPlan) -> Vec<DMatrix<C64>> {
    let py: Vec<f64> = y.iter().map(purity).collect();
    x.par_iter()
        .enumerate()
        .map(|(i, rho)| {
            let pr = purity(rho);
            let d = rho.dim();
            let mut g = DMatrix::<C64>::zeros(d, d);
            for (j, sigma) in y.iter().enumerate() {
                let w = plan.p[(i, j)];
                if w == 0.0 {
                    continue;
                }
                let coef = crate::qcore::mixedness_ratio(pr, py[j]);
                // −w (σ − coef ρ)
                g -= sigma.matrix() * C64::new(w, 0.0);
                g += rho.matrix() * C64::new(w * coef, 0.0);
            }
            g
        })
        .collect()
}
