//! Bond inference from geometry and bond-order assignment by repeated
//! maximum matching.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::molecule::Element;

/// Single-bond covalent radii in Å.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovalentRadii {
    pub c: f64,
    pub n: f64,
    pub o: f64,
    pub f: f64,
}

impl Default for CovalentRadii {
    fn default() -> Self {
        CovalentRadii {
            c: 0.76,
            n: 0.71,
            o: 0.66,
            f: 0.57,
        }
    }
}

impl CovalentRadii {
    pub fn get(&self, e: Element) -> f64 {
        match e {
            Element::C => self.c,
            Element::N => self.n,
            Element::O => self.o,
            Element::F => self.f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BondRules {
    pub radii: CovalentRadii,
    /// Multiplier on the summed radii.
    pub scale: f64,
}

impl Default for BondRules {
    fn default() -> Self {
        BondRules {
            radii: CovalentRadii::default(),
            scale: 2.2,
        }
    }
}

impl BondRules {
    pub fn threshold(&self, a: Element, b: Element) -> f64 {
        self.scale * (self.radii.get(a) + self.radii.get(b))
    }
}

/// 0/1 connectivity plus whether it forms a single component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    pub ac: Vec<Vec<u8>>,
    pub connected: bool,
}

pub fn infer_bonds(positions: &[[f64; 3]], elements: &[Element]) -> Adjacency {
    infer_bonds_with(positions, elements, &BondRules::default())
}

/// Bonds every pair within its covalent threshold, closest pairs first,
/// skipping a pair when either atom is already at its maximum valence.
pub fn infer_bonds_with(positions: &[[f64; 3]], elements: &[Element], rules: &BondRules) -> Adjacency {
    let n = positions.len().min(elements.len());
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = (0..3)
                .map(|a| (positions[i][a] - positions[j][a]).powi(2))
                .sum::<f64>()
                .sqrt();
            if d <= rules.threshold(elements[i], elements[j]) {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut ac = vec![vec![0u8; n]; n];
    let mut deg = vec![0usize; n];
    for (_, i, j) in pairs {
        if deg[i] < elements[i].valence() && deg[j] < elements[j].valence() {
            ac[i][j] = 1;
            ac[j][i] = 1;
            deg[i] += 1;
            deg[j] += 1;
        }
    }
    let connected = is_connected(&ac);
    Adjacency { ac, connected }
}

fn is_connected(ac: &[Vec<u8>]) -> bool {
    let n = ac.len();
    if n <= 1 {
        return true;
    }
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut q = VecDeque::from([0]);
    while let Some(v) = q.pop_front() {
        for w in 0..n {
            if ac[v][w] != 0 && !seen[w] {
                seen[w] = true;
                q.push_back(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Heavy-atom graph with bond orders and implicit hydrogen counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolecularGraph {
    pub elements: Vec<Element>,
    pub ac: Vec<Vec<u8>>,
    pub bo: Vec<Vec<u8>>,
    pub implicit_h: Vec<usize>,
    pub connected: bool,
    /// Promotion rounds that matched at least one edge.
    pub rounds: usize,
}

/// Highest bond order promotion will create.
pub const MAX_BOND_ORDER: u8 = 3;

/// Starts from single bonds and, while unsaturated bonded pairs remain,
/// raises the order of every edge in a maximum-cardinality matching of
/// them. Leftover deficiencies become implicit hydrogens.
pub fn complete_valences(ac: &[Vec<u8>], elements: &[Element]) -> MolecularGraph {
    let n = elements.len();
    let mut bo: Vec<Vec<u8>> = ac.to_vec();
    let used = |bo: &[Vec<u8>], i: usize| bo[i].iter().map(|&b| b as usize).sum::<usize>();
    let mut rounds = 0;
    loop {
        let unsat: Vec<bool> = (0..n).map(|i| used(&bo, i) < elements[i].valence()).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if ac[i][j] != 0 && unsat[i] && unsat[j] && bo[i][j] < MAX_BOND_ORDER {
                    edges.push((i, j));
                }
            }
        }
        if edges.is_empty() {
            break;
        }
        let mate = max_matching(n, &edges);
        let mut any = false;
        for i in 0..n {
            if let Some(j) = mate[i] {
                if i < j {
                    bo[i][j] += 1;
                    bo[j][i] += 1;
                    any = true;
                }
            }
        }
        if !any {
            break;
        }
        rounds += 1;
    }
    let implicit_h = (0..n)
        .map(|i| elements[i].valence().saturating_sub(used(&bo, i)))
        .collect();
    MolecularGraph {
        elements: elements.to_vec(),
        ac: ac.to_vec(),
        bo,
        implicit_h,
        connected: is_connected(ac),
        rounds,
    }
}

impl MolecularGraph {
    /// Plain-text listing: one `atom` line per atom (index, symbol, implicit
    /// H), one `bond` line per bonded pair (i, j, order), then connectivity.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, e) in self.elements.iter().enumerate() {
            writeln!(s, "atom {i} {} {}", e.symbol(), self.implicit_h[i]).unwrap();
        }
        let n = self.elements.len();
        for i in 0..n {
            for j in i + 1..n {
                if self.bo[i][j] > 0 {
                    writeln!(s, "bond {i} {j} {}", self.bo[i][j]).unwrap();
                }
            }
        }
        writeln!(s, "connected {}", self.connected).unwrap();
        s
    }
}

/// Maximum-cardinality matching on a general graph (Edmonds' blossom
/// algorithm), seeded with a greedy matching over `edges` in the given
/// order. Returns each vertex's mate.
pub fn max_matching(n: usize, edges: &[(usize, usize)]) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a != b {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let mut mate: Vec<Option<usize>> = vec![None; n];
    for &(a, b) in edges {
        if a != b && mate[a].is_none() && mate[b].is_none() {
            mate[a] = Some(b);
            mate[b] = Some(a);
        }
    }
    let mut b = Blossom::new(n);
    for root in 0..n {
        if mate[root].is_none() {
            if let Some(end) = b.find_path(root, &adj, &mate) {
                let mut v = Some(end);
                while let Some(x) = v {
                    let pv = b.parent[x].expect("alternating path");
                    let next = mate[pv];
                    mate[x] = Some(pv);
                    mate[pv] = Some(x);
                    v = next;
                }
            }
        }
    }
    mate
}

struct Blossom {
    parent: Vec<Option<usize>>,
    base: Vec<usize>,
    used: Vec<bool>,
    in_blossom: Vec<bool>,
}

impl Blossom {
    fn new(n: usize) -> Self {
        Blossom {
            parent: vec![None; n],
            base: (0..n).collect(),
            used: vec![false; n],
            in_blossom: vec![false; n],
        }
    }

    fn lca(&self, mut a: usize, mut b: usize, mate: &[Option<usize>]) -> usize {
        let mut seen = vec![false; mate.len()];
        loop {
            a = self.base[a];
            seen[a] = true;
            match mate[a] {
                None => break,
                Some(m) => a = self.parent[m].expect("tree vertex"),
            }
        }
        loop {
            b = self.base[b];
            if seen[b] {
                return b;
            }
            b = self.parent[mate[b].expect("matched")].expect("tree vertex");
        }
    }

    fn mark_path(&mut self, mut v: usize, b: usize, mut child: usize, mate: &[Option<usize>]) {
        while self.base[v] != b {
            let mv = mate[v].expect("matched");
            self.in_blossom[self.base[v]] = true;
            self.in_blossom[self.base[mv]] = true;
            self.parent[v] = Some(child);
            child = mv;
            v = self.parent[mv].expect("tree vertex");
        }
    }

    fn find_path(&mut self, root: usize, adj: &[Vec<usize>], mate: &[Option<usize>]) -> Option<usize> {
        let n = adj.len();
        self.used.fill(false);
        self.parent.fill(None);
        for i in 0..n {
            self.base[i] = i;
        }
        self.used[root] = true;
        let mut q = VecDeque::from([root]);
        while let Some(v) = q.pop_front() {
            for &to in &adj[v] {
                if self.base[v] == self.base[to] || mate[v] == Some(to) {
                    continue;
                }
                let odd_cycle = to == root || mate[to].is_some_and(|m| self.parent[m].is_some());
                if odd_cycle {
                    let cur = self.lca(v, to, mate);
                    self.in_blossom.fill(false);
                    self.mark_path(v, cur, to, mate);
                    self.mark_path(to, cur, v, mate);
                    for i in 0..n {
                        if self.in_blossom[self.base[i]] {
                            self.base[i] = cur;
                            if !self.used[i] {
                                self.used[i] = true;
                                q.push_back(i);
                            }
                        }
                    }
                } else if self.parent[to].is_none() {
                    self.parent[to] = Some(v);
                    match mate[to] {
                        None => return Some(to),
                        Some(m) => {
                            self.used[m] = true;
                            q.push_back(m);
                        }
                    }
                }
            }
        }
        None
    }
}
