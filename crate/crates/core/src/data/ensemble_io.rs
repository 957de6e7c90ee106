//! Ensemble files.
//!
//! Layout (little-endian): magic `LPQE`, `u16` version, `u8` flags (bit 0
//! set for density matrices), `u32` data-qubit count, `u32` state count,
//! then every state as interleaved `(re, im)` `f64` pairs: `2ⁿ` amplitudes
//! for pure states, or the `2ⁿ × 2ⁿ` matrix row-major for mixed ones.

use std::path::Path;

use nalgebra::DMatrix;

use crate::qcore::{DensityMatrix, StateVector, C64};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"LPQE";
const VERSION: u16 = 1;
const FLAG_MIXED: u8 = 1;
const HEADER_LEN: usize = 15;
const MAX_QUBITS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Ensemble {
    Pure { n_data: usize, states: Vec<StateVector> },
    Mixed { n_data: usize, states: Vec<DensityMatrix> },
}

impl Ensemble {
    pub fn mixed(states: Vec<DensityMatrix>) -> Result<Self> {
        let n_data = states
            .first()
            .map(|s| s.n_qubits())
            .ok_or_else(|| Error::Config("cannot infer qubit count of an empty ensemble".into()))?;
        if let Some(s) = states.iter().find(|s| s.n_qubits() != n_data) {
            return Err(Error::shape("state qubits", n_data, s.n_qubits()));
        }
        Ok(Ensemble::Mixed { n_data, states })
    }

    pub fn pure(states: Vec<StateVector>) -> Result<Self> {
        let n_data = states
            .first()
            .map(|s| s.n_qubits())
            .ok_or_else(|| Error::Config("cannot infer qubit count of an empty ensemble".into()))?;
        if let Some(s) = states.iter().find(|s| s.n_qubits() != n_data) {
            return Err(Error::shape("state qubits", n_data, s.n_qubits()));
        }
        Ok(Ensemble::Pure { n_data, states })
    }

    pub fn n_data(&self) -> usize {
        match self {
            Ensemble::Pure { n_data, .. } | Ensemble::Mixed { n_data, .. } => *n_data,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Ensemble::Pure { states, .. } => states.len(),
            Ensemble::Mixed { states, .. } => states.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_mixed(&self) -> bool {
        matches!(self, Ensemble::Mixed { .. })
    }

    /// Density matrices of every member.
    pub fn to_density(&self) -> Vec<DensityMatrix> {
        match self {
            Ensemble::Pure { states, .. } => states.iter().map(DensityMatrix::pure).collect(),
            Ensemble::Mixed { states, .. } => states.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let d = 1usize << self.n_data();
        let per = if self.is_mixed() { d * d } else { d };
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * per * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(if self.is_mixed() { FLAG_MIXED } else { 0 });
        out.extend_from_slice(&(self.n_data() as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        let mut put = |z: &C64| {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        };
        match self {
            Ensemble::Pure { states, .. } => states.iter().flat_map(|s| s.amplitudes()).for_each(&mut put),
            Ensemble::Mixed { states, .. } => {
                for s in states {
                    let m = s.matrix();
                    for i in 0..d {
                        for j in 0..d {
                            put(&m[(i, j)]);
                        }
                    }
                }
            }
        }
        out
    }

    /// Parses and validates every state.
    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let parse = |offset: usize, msg: String| Error::Parse { offset, msg };
        if buf.len() < HEADER_LEN {
            return Err(parse(
                buf.len(),
                format!("truncated header: {} of {HEADER_LEN} bytes", buf.len()),
            ));
        }
        if &buf[..4] != MAGIC {
            return Err(parse(0, "not an ensemble file".into()));
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != VERSION {
            return Err(parse(4, format!("unsupported version {version}")));
        }
        let flags = buf[6];
        if flags & !FLAG_MIXED != 0 {
            return Err(parse(6, format!("unknown flags {flags:#04x}")));
        }
        let n_data = u32::from_le_bytes(buf[7..11].try_into().unwrap()) as usize;
        if n_data == 0 || n_data > MAX_QUBITS {
            return Err(parse(7, format!("unsupported qubit count {n_data}")));
        }
        let count = u32::from_le_bytes(buf[11..15].try_into().unwrap()) as usize;
        let d = 1usize << n_data;
        let mixed = flags & FLAG_MIXED != 0;
        let per = if mixed { d * d } else { d };
        let state_bytes = per * 16;
        let need = HEADER_LEN as u128 + count as u128 * state_bytes as u128;
        if (buf.len() as u128) < need {
            let have = (buf.len() - HEADER_LEN) / state_bytes;
            return Err(parse(
                HEADER_LEN + have * state_bytes,
                format!("truncated payload: {have} of {count} states present"),
            ));
        }
        if buf.len() as u128 > need {
            return Err(parse(need as usize, "trailing bytes after last state".into()));
        }
        let read = |k: usize| -> Vec<C64> {
            let base = HEADER_LEN + k * state_bytes;
            buf[base..base + state_bytes]
                .chunks_exact(16)
                .map(|c| {
                    C64::new(
                        f64::from_le_bytes(c[..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..].try_into().unwrap()),
                    )
                })
                .collect()
        };
        let record = |index: usize, e: Error| Error::Record {
            index,
            msg: e.to_string(),
        };
        if mixed {
            let states = (0..count)
                .map(|k| DensityMatrix::new(DMatrix::from_row_slice(d, d, &read(k))).map_err(|e| record(k, e)))
                .collect::<Result<_>>()?;
            Ok(Ensemble::Mixed { n_data, states })
        } else {
            let states = (0..count)
                .map(|k| StateVector::from_amplitudes(read(k)).map_err(|e| record(k, e)))
                .collect::<Result<_>>()?;
            Ok(Ensemble::Pure { n_data, states })
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn round_trip_is_bit_identical() {
        let mut r = rng::stream(3, 0);
        let mixed = Ensemble::mixed((0..5).map(|_| DensityMatrix::random(2, 1, &mut r)).collect()).unwrap();
        let bytes = mixed.to_bytes();
        let back = Ensemble::from_bytes(&bytes).unwrap();
        assert_eq!(back, mixed);
        assert_eq!(back.to_bytes(), bytes);

        let pure = Ensemble::pure((0..3).map(|_| StateVector::haar(3, &mut r)).collect()).unwrap();
        assert_eq!(Ensemble::from_bytes(&pure.to_bytes()).unwrap(), pure);
    }

    #[test]
    fn truncation_names_offset() {
        let mut r = rng::stream(4, 0);
        let e = Ensemble::pure((0..3).map(|_| StateVector::haar(1, &mut r)).collect()).unwrap();
        let bytes = e.to_bytes();
        match Ensemble::from_bytes(&bytes[..bytes.len() - 5]) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, HEADER_LEN + 2 * 32),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Ensemble::from_bytes(&bytes[..9]),
            Err(Error::Parse { offset: 9, .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            Ensemble::from_bytes(&bad),
            Err(Error::Parse { offset: 0, .. })
        ));
    }

    #[test]
    fn non_unit_pure_state_rejected() {
        let e = Ensemble::pure(vec![StateVector::zero(1), StateVector::zero(1)]).unwrap();
        let mut bytes = e.to_bytes();
        // first amplitude of the second state: 1.0 → 2.0
        let at = HEADER_LEN + 32;
        bytes[at..at + 8].copy_from_slice(&2.0f64.to_le_bytes());
        assert!(matches!(
            Ensemble::from_bytes(&bytes),
            Err(Error::Record { index: 1, .. })
        ));
    }
}
