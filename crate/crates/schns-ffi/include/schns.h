#ifndef SCHNS_H
#define SCHNS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Field selectors for `schns_sim_field`.
 */
enum SchnsField
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  Phi = 0,
  Ux = 1,
  Uy = 2,
  Mu = 3,
};
#ifndef __cplusplus
typedef int32_t SchnsField;
#endif // __cplusplus

/**
 * Error codes returned by the C interface.
 */
enum SchnsStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  Ok = 0,
  NullPointer = 1,
  InvalidArgument = 2,
  ConfigError = 3,
  StepFailed = 4,
  BufferTooSmall = 5,
  Panic = 6,
};
#ifndef __cplusplus
typedef int32_t SchnsStatus;
#endif // __cplusplus

/**
 * Opaque simulation handle.
 */
typedef struct SchnsSim SchnsSim;

/**
 * Energy components of the current state.
 */
typedef struct SchnsEnergy {
  double total;
  double kinetic;
  double gradient_bulk;
  double boundary_l2;
  double boundary_grad;
  double bulk_potential;
  double boundary_potential;
  double dissipation;
  double mass;
  double t;
} SchnsEnergy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *schns_last_error(void);

/**
 * Build a simulation from a configuration string (same format as the CLI
 * config file; pass an empty string for the defaults). `path_index`
 * selects the RNG stream so callers can drive ensembles. Returns null on
 * failure; see `schns_last_error`.
 *
 * # Safety
 * `config_text` must be a valid NUL-terminated C string (or null for
 * defaults).
 */
struct SchnsSim *schns_sim_new(const char *config_text, uint64_t path_index);

/**
 * Advance the simulation by `n_steps` time steps.
 *
 * # Safety
 * `sim` must be a live pointer from `schns_sim_new`.
 */
SchnsStatus schns_sim_step(struct SchnsSim *sim, uint64_t n_steps);

/**
 * Current simulation time, or NaN for a null handle.
 *
 * # Safety
 * `sim` must be a live pointer from `schns_sim_new` (or null).
 */
double schns_sim_time(const struct SchnsSim *sim);

/**
 * Grid dimensions of the simulation.
 *
 * # Safety
 * `sim` must be live; `nx` and `ny` must point to writable u32 slots.
 */
SchnsStatus schns_sim_grid(const struct SchnsSim *sim, uint32_t *nx, uint32_t *ny);

/**
 * Energy report of the current state.
 *
 * # Safety
 * `sim` must be live; `out` must point to a writable `SchnsEnergy`.
 */
SchnsStatus schns_sim_energy(const struct SchnsSim *sim, struct SchnsEnergy *out);

/**
 * Copy a cell-centered field (row-major, nx * ny values) into `buf`.
 *
 * # Safety
 * `sim` must be live; `buf` must point to at least `len` writable f64.
 */
SchnsStatus schns_sim_field(const struct SchnsSim *sim,
                            SchnsField field,
                            double *buf,
                            uintptr_t len);

/**
 * Release a simulation handle. Passing null is a no-op.
 *
 * # Safety
 * `sim` must be a pointer from `schns_sim_new`, not yet freed.
 */
void schns_sim_free(struct SchnsSim *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCHNS_H */
