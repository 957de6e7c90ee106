//! Exact discrete optimal transport: Hungarian assignment for square
//! uniform problems, transportation simplex otherwise.

use nalgebra::DMatrix;

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting
/// paths with potentials). Returns `col[i]` for each row. Ties go to the
/// lowest column index.
pub fn hungarian(c: &DMatrix<f64>) -> Vec<usize> {
    let n = c.nrows();
    debug_assert_eq!(n, c.ncols());
    // 1-based arrays with a sentinel column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0; n];
    for j in 1..=n {
        col[row_of[j] - 1] = j - 1;
    }
    col
}

const REDUCED_TOL: f64 = 1e-12;

/// Transportation simplex from a northwest-corner basis. Returns the plan.
/// Pivots by most negative reduced cost, switching to Bland's rule after a
/// run of degenerate pivots so cycling cannot occur.
pub fn transport_simplex(c: &DMatrix<f64>, a: &[f64], b: &[f64]) -> DMatrix<f64> {
    let (m, n) = c.shape();
    let mut x = DMatrix::<f64>::zeros(m, n);
    let mut basic = vec![vec![false; n]; m];

    // northwest corner with exactly m+n-1 basic cells
    let mut s = a.to_vec();
    let mut d = b.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let q = s[i].min(d[j]).max(0.0);
        x[(i, j)] = q;
        basic[i][j] = true;
        s[i] -= q;
        d[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || s[i] <= d[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    // rounding residue lands on the final cell
    x[(m - 1, n - 1)] = x[(m - 1, n - 1)].max(0.0);

    let mut degenerate_run = 0usize;
    let max_iter = 50 * (m + n) * (m + n) + 1000;
    for _ in 0..max_iter {
        let (u, v) = potentials(c, &basic);
        let bland = degenerate_run > m + n;
        let mut enter = None;
        let mut best = -REDUCED_TOL;
        'scan: for i in 0..m {
            for j in 0..n {
                if basic[i][j] {
                    continue;
                }
                let r = c[(i, j)] - u[i] - v[j];
                if r < best {
                    enter = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = enter else { break };
        let cycle = basis_cycle(&basic, ei, ej);
        // cycle[0] is the entering cell (+); signs alternate afterwards
        let mut theta = f64::INFINITY;
        let mut leave = None;
        for (k, &(ci, cj)) in cycle.iter().enumerate().skip(1).step_by(2) {
            let _ = k;
            let q = x[(ci, cj)];
            if q < theta || (q == theta && leave.map_or(true, |l| (ci, cj) < l)) {
                theta = q;
                leave = Some((ci, cj));
            }
        }
        let leave = leave.expect("cycle has a minus cell");
        for (k, &(ci, cj)) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                x[(ci, cj)] += theta;
            } else {
                x[(ci, cj)] = (x[(ci, cj)] - theta).max(0.0);
            }
        }
        x[leave] = 0.0;
        basic[ei][ej] = true;
        basic[leave.0][leave.1] = false;
        if theta == 0.0 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }
    x
}

/// Dual potentials with `u₀ = 0` solving `uᵢ + vⱼ = Cᵢⱼ` on the basis tree.
fn potentials(c: &DMatrix<f64>, basic: &[Vec<bool>]) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = c.shape();
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    // nodes: rows 0..m, columns m..m+n
    let mut stack = vec![0usize];
    while let Some(node) = stack.pop() {
        if node < m {
            let i = node;
            for j in 0..n {
                if basic[i][j] && v[j].is_nan() {
                    v[j] = c[(i, j)] - u[i];
                    stack.push(m + j);
                }
            }
        } else {
            let j = node - m;
            for i in 0..m {
                if basic[i][j] && u[i].is_nan() {
                    u[i] = c[(i, j)] - v[j];
                    stack.push(i);
                }
            }
        }
    }
    debug_assert!(u.iter().chain(&v).all(|x| x.is_finite()), "basis is not spanning");
    (u, v)
}

/// Closed cycle formed by adding non-basic cell `(ei, ej)` to the basis
/// tree: the entering cell followed by the tree path from column `ej` back
/// to row `ei`, as cells.
fn basis_cycle(basic: &[Vec<bool>], ei: usize, ej: usize) -> Vec<(usize, usize)> {
    let m = basic.len();
    let n = basic[0].len();
    // BFS over the tree from column node ej to row node ei
    let total = m + n;
    let mut parent = vec![usize::MAX; total];
    let start = m + ej;
    parent[start] = start;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == ei {
            break;
        }
        if node < m {
            for j in 0..n {
                if basic[node][j] && parent[m + j] == usize::MAX {
                    parent[m + j] = node;
                    queue.push_back(m + j);
                }
            }
        } else {
            let j = node - m;
            for i in 0..m {
                if basic[i][j] && parent[i] == usize::MAX {
                    parent[i] = node;
                    queue.push_back(i);
                }
            }
        }
    }
    let mut cycle = vec![(ei, ej)];
    // walk back from row ei to column ej, recording tree edges
    let mut path = Vec::new();
    let mut node = ei;
    while node != start {
        let p = parent[node];
        let cell = if node < m { (node, p - m) } else { (p, node - m) };
        path.push(cell);
        node = p;
    }
    // path runs ei → … → ej; the cycle continues from ej, so reverse it
    path.reverse();
    cycle.extend(path);
    cycle
}
