#ifndef PNP_H
#define PNP_H

/* This header is generated by cbindgen from the pnp-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum PnpStatus {
  PNP_STATUS_OK = 0,
  PNP_STATUS_INVALID_ARGUMENT = 1,
  PNP_STATUS_GEOMETRY_ERROR = 2,
  PNP_STATUS_SOLVER_ERROR = 3,
  PNP_STATUS_INCOMPATIBLE_DATA = 4,
  PNP_STATUS_CONFIG_ERROR = 5,
  PNP_STATUS_IO_ERROR = 6,
  PNP_STATUS_CHECK_FAILED = 7,
  PNP_STATUS_INTERNAL_ERROR = 8,
} PnpStatus;

/**
 * Inclusion selector for [`pnp_unit_cell_new`].
 */
typedef enum PnpInclusion {
  PNP_INCLUSION_NONE = 0,
  PNP_INCLUSION_CENTERED_SQUARE = 1,
  PNP_INCLUSION_CENTERED_DISK = 2,
} PnpInclusion;

/**
 * Subcommand selector for [`pnp_run`].
 */
typedef enum PnpCommand {
  PNP_COMMAND_CELL = 0,
  PNP_COMMAND_HOMOG = 1,
  PNP_COMMAND_MICRO = 2,
  PNP_COMMAND_CONVERGE = 3,
  PNP_COMMAND_APP_PNP_SWEEP = 4,
  PNP_COMMAND_CHECK = 5,
} PnpCommand;

/**
 * Opaque smooth cut-off function.
 */
typedef struct PnpCutoff PnpCutoff;

/**
 * Opaque effective-tensor result (tensor entries, fluid fraction, and the
 * stored cell solutions).
 */
typedef struct PnpEffectiveTensor PnpEffectiveTensor;

/**
 * Opaque validated run configuration.
 */
typedef struct PnpRunConfig PnpRunConfig;

/**
 * Opaque discretized unit periodicity cell.
 */
typedef struct PnpUnitCell PnpUnitCell;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's most recent error message (NUL-terminated)
 * into `buf`; returns the full message length excluding the terminator.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes, or be NULL (query the
 * needed length).
 */
uintptr_t pnp_last_error(char *buf, uintptr_t len);

/**
 * B(x) = x / (e^x - 1), the exponential-fitting kernel.
 */
double pnp_bernoulli(double x);

/**
 * Exponentially fitted two-point face flux.
 */
double pnp_sg_face_flux(double c_left,
                        double c_right,
                        double psi_left,
                        double psi_right,
                        double d_face,
                        double h);

/**
 * Builds the unit periodicity cell. `param` is the square side or the disk
 * radius (ignored for `PNP_INCLUSION_NONE`).
 *
 * # Safety
 * `out` must be a valid pointer to receive the handle.
 */
enum PnpStatus pnp_unit_cell_new(uintptr_t resolution,
                                 enum PnpInclusion inclusion,
                                 double param,
                                 struct PnpUnitCell **out);

/**
 * Builds a unit cell from mask text (line 1 `N`, then `N` rows of
 * `F`/`S` characters).
 *
 * # Safety
 * `text` must be a valid NUL-terminated string; `out` must be valid.
 */
enum PnpStatus pnp_unit_cell_from_mask(const char *text, struct PnpUnitCell **out);

/**
 * # Safety
 * `cell` must be a live handle from this library (or NULL).
 */
void pnp_unit_cell_free(struct PnpUnitCell *cell);

/**
 * # Safety
 * `cell` and `out` must be valid pointers.
 */
enum PnpStatus pnp_unit_cell_fluid_fraction(const struct PnpUnitCell *cell, double *out);

/**
 * Measure of the inclusion boundary (exact formulas for the shipped
 * shapes, staircase count for custom masks).
 *
 * # Safety
 * `cell` and `out` must be valid pointers.
 */
enum PnpStatus pnp_unit_cell_boundary_measure(const struct PnpUnitCell *cell, double *out);

/**
 * Solves both periodic cell problems on `cell` and assembles the effective
 * tensor.
 *
 * # Safety
 * `cell` and `out` must be valid pointers.
 */
enum PnpStatus pnp_effective_tensor_compute(const struct PnpUnitCell *cell,
                                            struct PnpEffectiveTensor **out);

/**
 * Writes the tensor entries row-major into `entries[4]` and the fluid
 * fraction into `fluid_fraction` (either may be NULL).
 *
 * # Safety
 * Non-NULL pointers must be valid for the advertised sizes.
 */
enum PnpStatus pnp_effective_tensor_entries(const struct PnpEffectiveTensor *tensor,
                                            double *entries,
                                            double *fluid_fraction);

/**
 * # Safety
 * `tensor` must be a live handle from this library (or NULL).
 */
void pnp_effective_tensor_free(struct PnpEffectiveTensor *tensor);

/**
 * Builds the smooth cut-off of height `k` (> 1).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PnpStatus pnp_cutoff_new(double k, struct PnpCutoff **out);

/**
 * # Safety
 * `cutoff` must be a live handle.
 */
double pnp_cutoff_eval(const struct PnpCutoff *cutoff, double r);

/**
 * # Safety
 * `cutoff` must be a live handle.
 */
double pnp_cutoff_deriv(const struct PnpCutoff *cutoff, double r);

/**
 * # Safety
 * `cutoff` must be a live handle.
 */
double pnp_cutoff_second_deriv(const struct PnpCutoff *cutoff, double r);

/**
 * # Safety
 * `cutoff` must be a live handle from this library (or NULL).
 */
void pnp_cutoff_free(struct PnpCutoff *cutoff);

/**
 * Parses and validates a configuration document for `command`, applying
 * the charge-compatibility gate unless `allow_incompatible` is set.
 * `base_dir` (nullable) resolves relative mask paths.
 *
 * # Safety
 * `text` must be NUL-terminated; `base_dir` NULL or NUL-terminated; `out`
 * valid.
 */
enum PnpStatus pnp_run_config_parse(const char *text,
                                    const char *base_dir,
                                    enum PnpCommand command,
                                    bool allow_incompatible,
                                    struct PnpRunConfig **out);

/**
 * # Safety
 * `config` must be a live handle from this library (or NULL).
 */
void pnp_run_config_free(struct PnpRunConfig *config);

/**
 * Executes a subcommand against a parsed configuration, writing artifacts
 * to `out_dir` (NULL uses the configuration's output directory). Returns
 * `PNP_STATUS_CHECK_FAILED` when `PNP_COMMAND_CHECK` finds violations.
 *
 * # Safety
 * `config` must be a live handle; `out_dir` NULL or NUL-terminated.
 */
enum PnpStatus pnp_run(const struct PnpRunConfig *config,
                       enum PnpCommand command,
                       const char *out_dir,
                       uintptr_t threads,
                       bool allow_incompatible);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PNP_H */
