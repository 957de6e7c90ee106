//! C ABI over `lpqc`.
//!
//! Every fallible call returns an [`LpqcStatus`]; on failure a message is
//! kept per thread and can be fetched with [`lpqc_last_error_message`].
//! Models and ensembles are opaque handles released with their `_free`
//! function. Complex buffers are interleaved `(re, im)` doubles, matrices
//! row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use lpqc::data::{
    decode_state, encode_molecule, Element, EncodeOptions, Ensemble, MoleculeRecord, NormalizationContext, ScaleMode,
};
use lpqc::netgen::checkpoint::Model;
use lpqc::otloss::wasserstein_loss;
use lpqc::qcore::{super_fidelity, DensityMatrix, StateVector};
use lpqc::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpqcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    InvalidState = 4,
    Io = 5,
    Parse = 6,
    Config = 7,
    Degenerate = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Trained generator loaded from a checkpoint.
pub struct LpqcModel {
    inner: Model,
}

/// Ensemble of density matrices (or pure states) on `n_data` qubits.
pub struct LpqcEnsemble {
    inner: Ensemble,
}

/// Amplitudes in the molecule codec register.
pub const LPQC_CODEC_DIM: usize = 128;
pub const LPQC_MAX_ATOMS: usize = 9;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> LpqcStatus {
    match e {
        Error::Shape { .. } => LpqcStatus::Shape,
        Error::InvalidState(_) | Error::Histogram(_) | Error::EmptyMolecule => LpqcStatus::InvalidState,
        Error::Config(_) => LpqcStatus::Config,
        Error::Degenerate(_) => LpqcStatus::Degenerate,
        Error::Parse { .. } | Error::Record { .. } => LpqcStatus::Parse,
        Error::Io { .. } => LpqcStatus::Io,
    }
}

struct Fail(LpqcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LpqcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(LpqcStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LpqcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            LpqcStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            LpqcStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn complex_matrix(buf: &[f64], dim: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        let k = 2 * (i * dim + j);
        Complex64::new(buf[k], buf[k + 1])
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lpqc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message (NUL-terminated,
/// truncated to fit) into `buf` and returns the length the full message
/// needs including the terminator. `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lpqc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Loads a checkpoint into a new model handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpqc_model_load(path: *const c_char, out: *mut *mut LpqcModel) -> LpqcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let model = Model::load(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(LpqcModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`lpqc_model_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lpqc_model_free(model: *mut LpqcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of data qubits the model generates.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpqc_model_n_data(model: *const LpqcModel, out: *mut usize) -> LpqcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out_ptr(out, "out")? = m.inner.layout().n_data;
        Ok(())
    })
}

/// Draws `count` states with `seed` into a new mixed ensemble.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpqc_model_sample(
    model: *const LpqcModel,
    seed: u64,
    count: usize,
    out: *mut *mut LpqcEnsemble,
) -> LpqcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if count == 0 {
            return Err(invalid("count must be positive"));
        }
        let states = m.inner.sample_states(seed, count)?;
        *out = Box::into_raw(Box::new(LpqcEnsemble {
            inner: Ensemble::mixed(states)?,
        }));
        Ok(())
    })
}

/// Reads an ensemble file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpqc_ensemble_read(path: *const c_char, out: *mut *mut LpqcEnsemble) -> LpqcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let ens = Ensemble::read(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(LpqcEnsemble { inner: ens }));
        Ok(())
    })
}

/// Builds a mixed ensemble from `count` row-major interleaved density
/// matrices of dimension `2^n_data`, validating each.
///
/// # Safety
/// `data` must hold `count · 2 · 4^n_data` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpqc_ensemble_from_density(
    n_data: usize,
    count: usize,
    data: *const f64,
    out: *mut *mut LpqcEnsemble,
) -> LpqcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if count == 0 || n_data == 0 || n_data > 12 {
            return Err(invalid("need count > 0 and 1 <= n_data <= 12"));
        }
        let dim = 1usize << n_data;
        let stride = 2 * dim * dim;
        let buf = slice(data, count * stride, "data")?;
        let states = buf
            .chunks_exact(stride)
            .enumerate()
            .map(|(i, c)| {
                DensityMatrix::new(complex_matrix(c, dim)).map_err(|e| Error::Record {
                    index: i,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        *out = Box::into_raw(Box::new(LpqcEnsemble {
            inner: Ensemble::mixed(states)?,
        }));
        Ok(())
    })
}

/// # Safety
/// `ens` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lpqc_ensemble_write(ens: *const LpqcEnsemble, path: *const c_char) -> LpqcStatus {
    guard(|| {
        let e = ens.as_ref().ok_or_else(|| null("ensemble"))?;
        e.inner.write(&path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `ens` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lpqc_ensemble_free(ens: *mut LpqcEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Number of members.
///
/// # Safety
/// `ens` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpqc_ensemble_len(ens: *const LpqcEnsemble, out: *mut usize) -> LpqcStatus {
    guard(|| {
        let e = ens.as_ref().ok_or_else(|| null("ensemble"))?;
        *out_ptr(out, "out")? = e.inner.len();
        Ok(())
    })
}

/// Hilbert-space dimension `2^n_data` of each member.
///
/// # Safety
/// `ens` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpqc_ensemble_dim(ens: *const LpqcEnsemble, out: *mut usize) -> LpqcStatus {
    guard(|| {
        let e = ens.as_ref().ok_or_else(|| null("ensemble"))?;
        *out_ptr(out, "out")? = 1usize << e.inner.n_data();
        Ok(())
    })
}

/// Copies member `index` as a row-major interleaved density matrix into
/// `buf`, which must hold `2 · dim²` doubles.
///
/// # Safety
/// `ens` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lpqc_ensemble_copy_state(
    ens: *const LpqcEnsemble,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> LpqcStatus {
    guard(|| {
        let e = ens.as_ref().ok_or_else(|| null("ensemble"))?;
        if index >= e.inner.len() {
            return Err(invalid(format!(
                "index {index} out of range for {} states",
                e.inner.len()
            )));
        }
        let dim = 1usize << e.inner.n_data();
        if len < 2 * dim * dim {
            return Err(Fail(
                LpqcStatus::BufferTooSmall,
                format!("buffer holds {len} doubles, need {}", 2 * dim * dim),
            ));
        }
        let out = slice_mut(buf, len, "buf")?;
        let rho = match &e.inner {
            Ensemble::Pure { states, .. } => DensityMatrix::pure(&states[index]),
            Ensemble::Mixed { states, .. } => states[index].clone(),
        };
        let m = rho.matrix();
        for i in 0..dim {
            for j in 0..dim {
                let k = 2 * (i * dim + j);
                out[k] = m[(i, j)].re;
                out[k + 1] = m[(i, j)].im;
            }
        }
        Ok(())
    })
}

/// Exact uniform-weight optimal-transport distance `D_Wass(a, b)`.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpqc_wasserstein(a: *const LpqcEnsemble, b: *const LpqcEnsemble, out: *mut f64) -> LpqcStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        if a.inner.n_data() != b.inner.n_data() {
            return Err(Error::Shape {
                what: "ensemble qubits",
                expected: a.inner.n_data(),
                got: b.inner.n_data(),
            }
            .into());
        }
        *out_ptr(out, "out")? = wasserstein_loss(&a.inner.to_density(), &b.inner.to_density())?;
        Ok(())
    })
}

/// Super-fidelity of two `dim × dim` row-major interleaved density matrices.
///
/// # Safety
/// `rho` and `sigma` must each hold `2 · dim²` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lpqc_super_fidelity(
    rho: *const f64,
    sigma: *const f64,
    dim: usize,
    out: *mut f64,
) -> LpqcStatus {
    guard(|| {
        if dim == 0 || !dim.is_power_of_two() {
            return Err(invalid(format!("dimension {dim} is not a power of two")));
        }
        let r = DensityMatrix::new(complex_matrix(slice(rho, 2 * dim * dim, "rho")?, dim))?;
        let s = DensityMatrix::new(complex_matrix(slice(sigma, 2 * dim * dim, "sigma")?, dim))?;
        *out_ptr(out, "out")? = super_fidelity(&r, &s)?;
        Ok(())
    })
}

/// Amplitude-encodes a molecule of `n_atoms` atoms given by atomic numbers
/// (6, 7, 8, 9) and `3 · n_atoms` coordinates. Writes
/// `2 · LPQC_CODEC_DIM` interleaved amplitudes into `amps`.
///
/// # Safety
/// Pointers must reference buffers of the stated sizes; `v_min` holds 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn lpqc_encode_molecule(
    n_atoms: usize,
    atomic_numbers: *const u8,
    positions: *const f64,
    v_min: *const f64,
    delta: f64,
    align: bool,
    store_count: bool,
    amps: *mut f64,
) -> LpqcStatus {
    guard(|| {
        let z = slice(atomic_numbers, n_atoms, "atomic_numbers")?;
        let pos = slice(positions, 3 * n_atoms, "positions")?;
        let lo = slice(v_min, 3, "v_min")?;
        let out = slice_mut(amps, 2 * LPQC_CODEC_DIM, "amps")?;
        let atoms = z
            .iter()
            .zip(pos.chunks_exact(3))
            .map(|(&z, p)| {
                let e = Element::ALL
                    .into_iter()
                    .find(|e| e.atomic_number() == z)
                    .ok_or_else(|| invalid(format!("unsupported atomic number {z}")))?;
                Ok((e, [p[0], p[1], p[2]]))
            })
            .collect::<Result<Vec<_>, Fail>>()?;
        let mol = MoleculeRecord::new(atoms)?;
        let ctx = NormalizationContext::new([lo[0], lo[1], lo[2]], delta)?;
        let s = encode_molecule(&mol, &ctx, EncodeOptions { store_count, align })?;
        for (k, a) in s.amplitudes().iter().enumerate() {
            out[2 * k] = a.re;
            out[2 * k + 1] = a.im;
        }
        Ok(())
    })
}

/// Decodes `2 · LPQC_CODEC_DIM` interleaved amplitudes. `atoms` = 0 uses
/// occupancy detection. `paper_scale` selects the factor-2 position
/// convention. Writes up to `LPQC_MAX_ATOMS` atomic numbers and
/// `3 · LPQC_MAX_ATOMS` coordinates, and the atom count to `n_atoms`.
///
/// # Safety
/// Pointers must reference buffers of the stated sizes; `v_min` holds 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn lpqc_decode_state(
    amps: *const f64,
    v_min: *const f64,
    delta: f64,
    paper_scale: bool,
    atoms: usize,
    atomic_numbers: *mut u8,
    positions: *mut f64,
    n_atoms: *mut usize,
) -> LpqcStatus {
    guard(|| {
        let a = slice(amps, 2 * LPQC_CODEC_DIM, "amps")?;
        let lo = slice(v_min, 3, "v_min")?;
        let z_out = slice_mut(atomic_numbers, LPQC_MAX_ATOMS, "atomic_numbers")?;
        let p_out = slice_mut(positions, 3 * LPQC_MAX_ATOMS, "positions")?;
        let n_out = out_ptr(n_atoms, "n_atoms")?;
        let v: Vec<Complex64> = a.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let state = StateVector::normalized(v)?;
        let ctx = NormalizationContext::new([lo[0], lo[1], lo[2]], delta)?;
        let mode = if paper_scale {
            ScaleMode::Paper2x
        } else {
            ScaleMode::Strict1x
        };
        let mol = decode_state(&state, &ctx, mode, (atoms > 0).then_some(atoms))?;
        for (i, (e, p)) in mol.elements().iter().zip(mol.positions()).enumerate() {
            z_out[i] = e.atomic_number();
            p_out[3 * i..3 * i + 3].copy_from_slice(&p);
        }
        *n_out = mol.len();
        Ok(())
    })
}
