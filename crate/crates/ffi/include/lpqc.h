#ifndef LPQC_H
#define LPQC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Amplitudes in the molecule codec register.
 */
#define LPQC_CODEC_DIM 128

#define LPQC_MAX_ATOMS 9

/**
 * Result of every fallible call.
 */
typedef enum LpqcStatus {
  LPQC_STATUS_OK = 0,
  LPQC_STATUS_NULL_POINTER = 1,
  LPQC_STATUS_INVALID_ARGUMENT = 2,
  LPQC_STATUS_SHAPE = 3,
  LPQC_STATUS_INVALID_STATE = 4,
  LPQC_STATUS_IO = 5,
  LPQC_STATUS_PARSE = 6,
  LPQC_STATUS_CONFIG = 7,
  LPQC_STATUS_DEGENERATE = 8,
  LPQC_STATUS_BUFFER_TOO_SMALL = 9,
  LPQC_STATUS_PANIC = 10,
} LpqcStatus;

/**
 * Ensemble of density matrices (or pure states) on `n_data` qubits.
 */
typedef struct LpqcEnsemble LpqcEnsemble;

/**
 * Trained generator loaded from a checkpoint.
 */
typedef struct LpqcModel LpqcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lpqc_version(void);

/**
 * Copies the calling thread's last error message (NUL-terminated,
 * truncated to fit) into `buf` and returns the length the full message
 * needs including the terminator. `buf` may be null to query the length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t lpqc_last_error_message(char *buf, size_t len);

/**
 * Loads a checkpoint into a new model handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LpqcStatus lpqc_model_load(const char *path, struct LpqcModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`lpqc_model_load`], not yet freed.
 */
void lpqc_model_free(struct LpqcModel *model);

/**
 * Number of data qubits the model generates.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum LpqcStatus lpqc_model_n_data(const struct LpqcModel *model, size_t *out);

/**
 * Draws `count` states with `seed` into a new mixed ensemble.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum LpqcStatus lpqc_model_sample(const struct LpqcModel *model,
                                  uint64_t seed,
                                  size_t count,
                                  struct LpqcEnsemble **out);

/**
 * Reads an ensemble file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LpqcStatus lpqc_ensemble_read(const char *path, struct LpqcEnsemble **out);

/**
 * Builds a mixed ensemble from `count` row-major interleaved density
 * matrices of dimension `2^n_data`, validating each.
 *
 * # Safety
 * `data` must hold `count · 2 · 4^n_data` doubles; `out` must be writable.
 */
enum LpqcStatus lpqc_ensemble_from_density(size_t n_data,
                                           size_t count,
                                           const double *data,
                                           struct LpqcEnsemble **out);

/**
 * # Safety
 * `ens` must be a live handle; `path` a NUL-terminated string.
 */
enum LpqcStatus lpqc_ensemble_write(const struct LpqcEnsemble *ens, const char *path);

/**
 * # Safety
 * `ens` must be null or a live handle.
 */
void lpqc_ensemble_free(struct LpqcEnsemble *ens);

/**
 * Number of members.
 *
 * # Safety
 * `ens` must be a live handle; `out` must be writable.
 */
enum LpqcStatus lpqc_ensemble_len(const struct LpqcEnsemble *ens, size_t *out);

/**
 * Hilbert-space dimension `2^n_data` of each member.
 *
 * # Safety
 * `ens` must be a live handle; `out` must be writable.
 */
enum LpqcStatus lpqc_ensemble_dim(const struct LpqcEnsemble *ens, size_t *out);

/**
 * Copies member `index` as a row-major interleaved density matrix into
 * `buf`, which must hold `2 · dim²` doubles.
 *
 * # Safety
 * `ens` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum LpqcStatus lpqc_ensemble_copy_state(const struct LpqcEnsemble *ens,
                                         size_t index,
                                         double *buf,
                                         size_t len);

/**
 * Exact uniform-weight optimal-transport distance `D_Wass(a, b)`.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
enum LpqcStatus lpqc_wasserstein(const struct LpqcEnsemble *a,
                                 const struct LpqcEnsemble *b,
                                 double *out);

/**
 * Super-fidelity of two `dim × dim` row-major interleaved density matrices.
 *
 * # Safety
 * `rho` and `sigma` must each hold `2 · dim²` doubles; `out` must be writable.
 */
enum LpqcStatus lpqc_super_fidelity(const double *rho,
                                    const double *sigma,
                                    size_t dim,
                                    double *out);

/**
 * Amplitude-encodes a molecule of `n_atoms` atoms given by atomic numbers
 * (6, 7, 8, 9) and `3 · n_atoms` coordinates. Writes
 * `2 · LPQC_CODEC_DIM` interleaved amplitudes into `amps`.
 *
 * # Safety
 * Pointers must reference buffers of the stated sizes; `v_min` holds 3 doubles.
 */
enum LpqcStatus lpqc_encode_molecule(size_t n_atoms,
                                     const uint8_t *atomic_numbers,
                                     const double *positions,
                                     const double *v_min,
                                     double delta,
                                     bool align,
                                     bool store_count,
                                     double *amps);

/**
 * Decodes `2 · LPQC_CODEC_DIM` interleaved amplitudes. `atoms` = 0 uses
 * occupancy detection. `paper_scale` selects the factor-2 position
 * convention. Writes up to `LPQC_MAX_ATOMS` atomic numbers and
 * `3 · LPQC_MAX_ATOMS` coordinates, and the atom count to `n_atoms`.
 *
 * # Safety
 * Pointers must reference buffers of the stated sizes; `v_min` holds 3 doubles.
 */
enum LpqcStatus lpqc_decode_state(const double *amps,
                                  const double *v_min,
                                  double delta,
                                  bool paper_scale,
                                  size_t atoms,
                                  uint8_t *atomic_numbers,
                                  double *positions,
                                  size_t *n_atoms);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPQC_H */
