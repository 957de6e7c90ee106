use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Projection {
    pub points: Vec<Vec<f64>>,
    /// Top eigenvalues of the (1/N-normalized) covariance, descending.
    pub eigenvalues: Vec<f64>,
    /// Set when the data rank is below `k`; missing axes are zero-padded.
    pub rank_deficient: bool,
}

/// Projects centered vectors onto their top-`k` principal axes. Each axis is
/// signed so that its first nonzero coordinate is positive. Uses the Gram
/// matrix when there are fewer points than dimensions.
pub fn pca_project(vectors: &[Vec<f64>], k: usize) -> Result<Projection> {
    let n = vectors.len();
    if n < k + 1 {
        return Err(Error::Config(format!("need at least {} vectors, got {n}", k + 1)));
    }
    let d = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::shape("vector length", d, v.len()));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, d, |i, j| vectors[i][j] - mean[j]);

    // principal axes as columns of a d×r matrix, with eigenvalues
    let (axes, evals) = if d <= n {
        let cov = x.transpose() * &x / n as f64;
        let eig = SymmetricEigen::new(cov);
        let order = descending(&eig.eigenvalues.as_slice());
        let axes = DMatrix::from_fn(d, order.len(), |i, c| eig.eigenvectors[(i, order[c])]);
        let vals: Vec<f64> = order.iter().map(|&o| eig.eigenvalues[o]).collect();
        (axes, vals)
    } else {
        let gram = &x * x.transpose() / n as f64;
        let eig = SymmetricEigen::new(gram);
        let order = descending(&eig.eigenvalues.as_slice());
        let vals: Vec<f64> = order.iter().map(|&o| eig.eigenvalues[o]).collect();
        let top = vals.first().copied().unwrap_or(0.0).max(0.0);
        let mut axes = DMatrix::zeros(d, order.len());
        for (c, &o) in order.iter().enumerate() {
            if vals[c] <= RANK_TOL * top || vals[c] <= 0.0 {
                continue;
            }
            let u = eig.eigenvectors.column(o);
            let v = x.transpose() * u;
            let nv = v.norm();
            axes.set_column(c, &(v / nv));
        }
        (axes, vals)
    };
    let top = evals.first().copied().unwrap_or(0.0).max(0.0);
    let rank = evals.iter().filter(|&&l| l > RANK_TOL * top && l > 0.0).count();
    let used = k.min(rank);
    let mut points = vec![vec![0.0; k]; n];
    for c in 0..used {
        let mut axis = axes.column(c).into_owned();
        if let Some(first) = axis.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                axis = -axis;
            }
        }
        let proj = &x * axis;
        for i in 0..n {
            points[i][c] = proj[i];
        }
    }
    let mut eigenvalues: Vec<f64> = evals.iter().take(k).map(|l| l.max(0.0)).collect();
    eigenvalues.resize(k, 0.0);
    Ok(Projection {
        points,
        eigenvalues,
        rank_deficient: rank < k,
    })
}

fn descending(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn line_in_3d() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 2.5, -3.0]
            .iter()
            .map(|t| vec![1.0 + t, 2.0 - 2.0 * t, 0.5 * t])
            .collect();
        let p = pca_project(&pts, 1).unwrap();
        assert!(!p.rank_deficient);
        for i in 0..4 {
            for j in 0..4 {
                assert!((dist(&p.points[i], &p.points[j]) - dist(&pts[i], &pts[j])).abs() < 1e-8);
            }
        }
        let p2 = pca_project(&pts, 2).unwrap();
        assert!(p2.rank_deficient);
        assert!(p2.points.iter().all(|q| q[1] == 0.0));
    }

    #[test]
    fn full_dimension_preserves_distances_and_reconstruction_identity() {
        let mut r = rng::stream(2, 0);
        for (n, d) in [(20, 5), (4, 7)] {
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect())
                .collect();
            let kfull = d.min(n - 1);
            let p = pca_project(&pts, kfull).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert!((dist(&p.points[i], &p.points[j]) - dist(&pts[i], &pts[j])).abs() < 1e-8);
                }
            }
            // mean squared residual after keeping k axes = discarded eigenvalue mass
            let total: f64 = p.eigenvalues.iter().sum();
            let k = 2;
            let pk = pca_project(&pts, k).unwrap();
            let kept: f64 = pk.points.iter().flatten().map(|v| v * v).sum::<f64>() / n as f64;
            let mean: Vec<f64> = (0..d)
                .map(|j| pts.iter().map(|v| v[j]).sum::<f64>() / n as f64)
                .collect();
            let spread: f64 = pts.iter().map(|v| dist(v, &mean).powi(2)).sum::<f64>() / n as f64;
            assert!((spread - total).abs() < 1e-8);
            assert!(((spread - kept) - p.eigenvalues[k..].iter().sum::<f64>()).abs() < 1e-8);
        }
    }

    #[test]
    fn too_few_points() {
        assert!(pca_project(&[vec![1.0, 2.0]], 1).is_err());
    }
}
