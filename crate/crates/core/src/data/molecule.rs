//! Molecule ↔ 7-qubit amplitude codec.
//!
//! Atom `i` occupies amplitudes `[7i, 7i+7)` as `(x̃, ỹ, z̃, C, N, O, F)` with
//! normalized coordinates and a one-hot type. The auxiliary block
//! `αᵢ = √max(0, 3 − |ṽᵢ|²)` follows at `[7m, 8m)`, then zeros. Each atom
//! contributes exactly 4 to the squared norm, so dividing by `2√m` gives a
//! unit vector. Amplitude `127` optionally stores the atom count.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::qcore::{DensityMatrix, StateVector, C64};
use crate::{Error, Result};

pub const CODEC_QUBITS: usize = 7;
const DIM: usize = 1 << CODEC_QUBITS;
const BLOCK: usize = 7;
/// Largest molecule in the dataset family.
pub const MAX_ATOMS: usize = 9;
/// Occupancy threshold for inferring the atom count.
pub const OCCUPANCY_TAU: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    C,
    N,
    O,
    F,
}

impl Element {
    pub const ALL: [Element; 4] = [Element::C, Element::N, Element::O, Element::F];

    /// Position in the one-hot type block.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn atomic_number(self) -> u8 {
        6 + self as u8
    }

    pub fn symbol(self) -> &'static str {
        ["C", "N", "O", "F"][self as usize]
    }

    /// Maximum (and target) valence.
    pub fn valence(self) -> usize {
        [4, 3, 2, 1][self as usize]
    }
}

impl FromStr for Element {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C" => Ok(Element::C),
            "N" => Ok(Element::N),
            "O" => Ok(Element::O),
            "F" => Ok(Element::F),
            other => Err(Error::Config(format!("unsupported element {other:?}"))),
        }
    }
}

/// Heavy atoms in canonical order with positions in Å.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeRecord {
    pub atoms: Vec<(Element, [f64; 3])>,
}

impl MoleculeRecord {
    pub fn new(atoms: Vec<(Element, [f64; 3])>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMolecule);
        }
        if atoms.len() > MAX_ATOMS {
            return Err(Error::Config(format!(
                "{} atoms exceeds the limit of {MAX_ATOMS}",
                atoms.len()
            )));
        }
        if atoms.iter().flat_map(|(_, p)| p).any(|c| !c.is_finite()) {
            return Err(Error::Config("atom coordinates must be finite".into()));
        }
        Ok(MoleculeRecord { atoms })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn elements(&self) -> Vec<Element> {
        self.atoms.iter().map(|a| a.0).collect()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.atoms.iter().map(|a| a.1).collect()
    }
}

/// Per-axis minimum and scalar bounding-box side of the training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationContext {
    pub v_min: [f64; 3],
    pub delta: f64,
}

impl NormalizationContext {
    pub fn new(v_min: [f64; 3], delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() || v_min.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("invalid normalization context (Δ = {delta})")));
        }
        Ok(NormalizationContext { v_min, delta })
    }

    /// Bounding box of every atom of `mols`; `Δ` is the longest side.
    pub fn fit(mols: &[MoleculeRecord]) -> Result<Self> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for (_, p) in mols.iter().flat_map(|m| &m.atoms) {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let delta = (0..3).map(|a| hi[a] - lo[a]).fold(f64::NEG_INFINITY, f64::max);
        Self::new(lo, delta)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::Config(format!("context: {e}")))?;
        Self::new(c.v_min, c.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Write the atom count into amplitude 127 and renormalize.
    pub store_count: bool,
    /// Center on the centroid and rotate the first atom onto `+z` first.
    pub align: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            store_count: false,
            align: true,
        }
    }
}

/// Centroid at the origin, first atom on the positive `z` axis. A first atom
/// sitting on the centroid leaves the orientation unchanged.
pub fn align_molecule(mol: &MoleculeRecord) -> MoleculeRecord {
    let n = mol.len() as f64;
    let mut c = [0.0; 3];
    for (_, p) in &mol.atoms {
        for a in 0..3 {
            c[a] += p[a] / n;
        }
    }
    let centered: Vec<[f64; 3]> = mol
        .atoms
        .iter()
        .map(|(_, p)| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
        .collect();
    let first = centered[0];
    let r = norm3(first);
    let rotated = if r < 1e-12 {
        centered
    } else {
        let u = [first[0] / r, first[1] / r, first[2] / r];
        let rot = rotation_onto_z(u);
        centered.iter().map(|p| mat_vec(&rot, *p)).collect()
    };
    MoleculeRecord {
        atoms: mol.atoms.iter().zip(rotated).map(|((e, _), p)| (*e, p)).collect(),
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

/// Rodrigues rotation taking unit vector `u` to `ẑ`.
fn rotation_onto_z(u: [f64; 3]) -> [[f64; 3]; 3] {
    let cos = u[2];
    // axis k = u × ẑ = (u_y, −u_x, 0)
    let k = [u[1], -u[0], 0.0];
    let sin = norm3(k);
    if sin < 1e-12 {
        return if cos > 0.0 {
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        } else {
            // half turn about x
            [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]
        };
    }
    let k = [k[0] / sin, k[1] / sin, k[2] / sin];
    let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let kk: f64 = (0..3).map(|l| kx[i][l] * kx[l][j]).sum();
            r[i][j] = if i == j { 1.0 } else { 0.0 } + sin * kx[i][j] + (1.0 - cos) * kk;
        }
    }
    r
}

/// Raw (pre-normalization) feature vector of a molecule.
fn features(mol: &MoleculeRecord, ctx: &NormalizationContext) -> Vec<f64> {
    let m = mol.len();
    let mut x = vec![0.0; DIM];
    for (i, (e, p)) in mol.atoms.iter().enumerate() {
        let t = [0, 1, 2].map(|a| (p[a] - ctx.v_min[a]) / ctx.delta);
        x[BLOCK * i..BLOCK * i + 3].copy_from_slice(&t);
        x[BLOCK * i + 3 + e.index()] = 1.0;
        let r2 = t[0] * t[0] + t[1] * t[1] + t[2] * t[2];
        x[BLOCK * m + i] = (3.0 - r2).max(0.0).sqrt();
    }
    x
}

/// Amplitude-encodes a molecule. With `store_count` off and every
/// normalized position inside the `|ṽ|² ≤ 3` ball the division by `2√m`
/// is already exact; otherwise the vector is renormalized.
pub fn encode_molecule(mol: &MoleculeRecord, ctx: &NormalizationContext, opts: EncodeOptions) -> Result<StateVector> {
    let m = mol.len();
    if m == 0 {
        return Err(Error::EmptyMolecule);
    }
    if m > MAX_ATOMS {
        return Err(Error::Config(format!("{m} atoms exceeds the limit of {MAX_ATOMS}")));
    }
    let aligned;
    let mol = if opts.align {
        aligned = align_molecule(mol);
        &aligned
    } else {
        mol
    };
    let mut x = features(mol, ctx);
    if opts.store_count {
        x[DIM - 1] = m as f64;
    }
    let scale = 2.0 * (m as f64).sqrt();
    let amps: Vec<C64> = x.iter().map(|v| C64::new(v / scale, 0.0)).collect();
    match StateVector::from_amplitudes(amps.clone()) {
        Ok(s) => Ok(s),
        Err(_) => StateVector::normalized(amps),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    /// `v = 2Δṽ + v_min`.
    Paper2x,
    /// `v = Δṽ + v_min`, the exact inverse of the encoder.
    Strict1x,
}

/// Leading atom blocks whose type amplitudes sum above `tau`, read off the
/// raw amplitude moduli and capped at [`MAX_ATOMS`].
pub fn detect_atom_count(x: &[f64], tau: f64) -> usize {
    (0..MAX_ATOMS)
        .take_while(|&i| x[BLOCK * i + 3..BLOCK * i + 7].iter().sum::<f64>() > tau)
        .count()
}

/// Reads positions and types back from amplitude moduli.
pub fn decode_state(
    state: &StateVector,
    ctx: &NormalizationContext,
    mode: ScaleMode,
    m_override: Option<usize>,
) -> Result<MoleculeRecord> {
    if state.n_qubits() != CODEC_QUBITS {
        return Err(Error::shape("codec qubits", CODEC_QUBITS, state.n_qubits()));
    }
    let x: Vec<f64> = state.amplitudes().iter().map(|a| a.norm()).collect();
    let m = match m_override {
        Some(m) if m > MAX_ATOMS => return Err(Error::Config(format!("{m} atoms exceeds the limit of {MAX_ATOMS}"))),
        Some(m) => m,
        None => detect_atom_count(&x, OCCUPANCY_TAU),
    };
    if m == 0 {
        return Err(Error::EmptyMolecule);
    }
    let s = 2.0 * (m as f64).sqrt();
    let k = match mode {
        ScaleMode::Paper2x => 2.0,
        ScaleMode::Strict1x => 1.0,
    };
    let atoms = (0..m)
        .map(|i| {
            let b = &x[BLOCK * i..BLOCK * i + BLOCK];
            let mut best = 0;
            for t in 1..4 {
                if b[3 + t] > b[3 + best] {
                    best = t;
                }
            }
            let pos = [0, 1, 2].map(|a| k * ctx.delta * s * b[a] + ctx.v_min[a]);
            (Element::ALL[best], pos)
        })
        .collect();
    Ok(MoleculeRecord { atoms })
}

/// Dominant eigenvector of a density matrix (the state itself when pure).
pub fn principal_state(rho: &DensityMatrix) -> Result<StateVector> {
    let eig = nalgebra::SymmetricEigen::new(rho.matrix().clone());
    let k = (0..eig.eigenvalues.len())
        .max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .ok_or_else(|| Error::Degenerate("empty matrix".into()))?;
    let v: Vec<C64> = eig.eigenvectors.column(k).iter().copied().collect();
    StateVector::normalized(v)
}

/// Parses molecules: a count line followed by that many `symbol x y z`
/// lines, repeated. Blank lines and `#` comments are skipped.
pub fn parse_molecules(text: &str) -> Result<Vec<MoleculeRecord>> {
    let mut out = Vec::new();
    for r in scan_records(text) {
        out.push(r.map_err(|(_, e)| e)?);
    }
    Ok(out)
}

/// Like [`parse_molecules`] but keeps going past bad records. Each failure is
/// an [`Error::Record`] carrying the record index and byte offset. A count
/// line that does not parse ends the scan, since record boundaries are lost.
pub fn parse_molecule_records(text: &str) -> Vec<Result<MoleculeRecord>> {
    scan_records(text)
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|(_, e)| Error::Record {
                index,
                msg: e.to_string(),
            })
        })
        .collect()
}

type Scanned = std::result::Result<MoleculeRecord, (usize, Error)>;

fn scan_records(text: &str) -> Vec<Scanned> {
    let mut lines = text
        .lines()
        .scan(0usize, |off, l| {
            let start = *off;
            *off += l.len() + 1;
            Some((start, l))
        })
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });
    let perr = |offset: usize, msg: String| (offset, Error::Parse { offset, msg });
    let mut out = Vec::new();
    while let Some((off, line)) = lines.next() {
        let Ok(count) = line.trim().parse::<usize>() else {
            out.push(Err(perr(
                off,
                format!("expected an atom count, found {:?}", line.trim()),
            )));
            break;
        };
        let mut atoms = Vec::with_capacity(count);
        let mut failure = None;
        for _ in 0..count {
            let Some((off, line)) = lines.next() else {
                failure.get_or_insert(perr(text.len(), "missing atom lines".into()));
                break;
            };
            if failure.is_some() {
                continue;
            }
            match parse_atom(line) {
                Ok(a) => atoms.push(a),
                Err(msg) => failure = Some(perr(off, msg)),
            }
        }
        out.push(match failure {
            Some(f) => Err(f),
            None => MoleculeRecord::new(atoms).map_err(|e| perr(off, e.to_string())),
        });
    }
    out
}

fn parse_atom(line: &str) -> std::result::Result<(Element, [f64; 3]), String> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 4 {
        return Err(format!("expected `symbol x y z`, found {:?}", line.trim()));
    }
    let e: Element = f[0].parse().map_err(|e: Error| e.to_string())?;
    let mut p = [0.0; 3];
    for a in 0..3 {
        p[a] = f[1 + a].parse().map_err(|_| format!("bad coordinate {:?}", f[1 + a]))?;
    }
    Ok((e, p))
}

pub fn format_molecules(mols: &[MoleculeRecord]) -> String {
    let mut s = String::new();
    for m in mols {
        writeln!(s, "{}", m.len()).unwrap();
        for (e, p) in &m.atoms {
            writeln!(s, "{} {:.10} {:.10} {:.10}", e.symbol(), p[0], p[1], p[2]).unwrap();
        }
    }
    s
}
