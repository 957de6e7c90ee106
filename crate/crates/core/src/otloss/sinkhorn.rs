use nalgebra::DMatrix;

/// Log-domain Sinkhorn iterations. Returns the plan, the number of
/// iterations run, and whether the row-marginal violation reached `tol`.
pub(crate) fn sinkhorn_log(
    c: &DMatrix<f64>,
    a: &[f64],
    b: &[f64],
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> (DMatrix<f64>, usize, bool) {
    let (m, n) = c.shape();
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let plan = |f: &[f64], g: &[f64]| {
        DMatrix::from_fn(m, n, |i, j| {
            let e = (f[i] + g[j] - c[(i, j)]) / epsilon;
            if e.is_finite() {
                e.exp()
            } else {
                0.0
            }
        })
    };
    let mut iters = 0;
    let mut converged = false;
    while iters < max_iters {
        iters += 1;
        for i in 0..m {
            let lse = log_sum_exp((0..n).map(|j| (g[j] - c[(i, j)]) / epsilon));
            f[i] = epsilon * (log_a[i] - lse);
        }
        for j in 0..n {
            let lse = log_sum_exp((0..m).map(|i| (f[i] - c[(i, j)]) / epsilon));
            g[j] = epsilon * (log_b[j] - lse);
        }
        let p = plan(&f, &g);
        let violation: f64 = (0..m).map(|i| (p.row(i).sum() - a[i]).abs()).sum();
        if violation <= tol {
            converged = true;
            break;
        }
    }
    (plan(&f, &g), iters, converged)
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + xs.map(|x| (x - mx).exp()).sum::<f64>().ln()
}
