#ifndef FRACFLOW_H
#define FRACFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FracflowScheme {
  FRACFLOW_SCHEME_MOMENT_ASSEMBLY = 0,
  FRACFLOW_SCHEME_COLLAPSED = 1,
} FracflowScheme;

typedef enum FracflowStatus {
  FRACFLOW_STATUS_OK = 0,
  FRACFLOW_STATUS_NULL_POINTER = 1,
  FRACFLOW_STATUS_INVALID_ARGUMENT = 2,
  FRACFLOW_STATUS_CONFIG = 3,
  FRACFLOW_STATUS_NON_CONVERGENCE = 4,
  FRACFLOW_STATUS_NO_CONTRACTION = 5,
  FRACFLOW_STATUS_OUT_OF_RANGE = 6,
  FRACFLOW_STATUS_IO = 7,
  FRACFLOW_STATUS_INTERNAL = 8,
} FracflowStatus;

typedef struct FracflowConfig FracflowConfig;

typedef struct FracflowPath FracflowPath;

typedef struct FracflowSolution FracflowSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *fracflow_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fracflow_version(void);

/**
 * Default run configuration.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum FracflowStatus fracflow_config_default(struct FracflowConfig **out);

/**
 * Parses and validates a TOML configuration.
 *
 * # Safety
 * `text` must be a NUL-terminated UTF-8 string and `out` writable.
 */
enum FracflowStatus fracflow_config_from_toml(const char *text, struct FracflowConfig **out);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum FracflowStatus fracflow_config_set_seed(struct FracflowConfig *cfg, uint64_t seed);

/**
 * Sets the number of time steps to `2^k`.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum FracflowStatus fracflow_config_set_grid_pow(struct FracflowConfig *cfg, uint32_t k);

/**
 * Sets the number of spectral modes.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum FracflowStatus fracflow_config_set_modes(struct FracflowConfig *cfg, size_t n_modes);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void fracflow_config_free(struct FracflowConfig *cfg);

/**
 * Samples the configured Q-fractional Brownian driver from the config's seed.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum FracflowStatus fracflow_driver_sample(const struct FracflowConfig *cfg,
                                           struct FracflowPath **out);

/**
 * # Safety
 * `path` must be a live handle.
 */
size_t fracflow_path_n_steps(const struct FracflowPath *path);

/**
 * # Safety
 * `path` must be a live handle.
 */
size_t fracflow_path_n_modes(const struct FracflowPath *path);

/**
 * Coefficient `mode` of the path at node `k`.
 *
 * # Safety
 * `path` must be a live handle and `out` writable.
 */
enum FracflowStatus fracflow_path_value(const struct FracflowPath *path,
                                        size_t k,
                                        size_t mode,
                                        double *out);

/**
 * # Safety
 * `path` must be null or a handle not yet freed.
 */
void fracflow_path_free(struct FracflowPath *path);

/**
 * Solves the configured problem against `driver` from the configured initial value.
 *
 * # Safety
 * `cfg` and `driver` must be live handles and `out` writable.
 */
enum FracflowStatus fracflow_solve(const struct FracflowConfig *cfg,
                                   const struct FracflowPath *driver,
                                   struct FracflowSolution **out);

/**
 * Number of distinct fixed points found.
 *
 * # Safety
 * `sol` must be a live handle.
 */
size_t fracflow_solution_count(const struct FracflowSolution *sol);

/**
 * Weight `rho` at which the iteration contracted.
 *
 * # Safety
 * `sol` must be a live handle.
 */
double fracflow_solution_rho(const struct FracflowSolution *sol);

/**
 * Coefficient `mode` at node `k` of solution `index`.
 *
 * # Safety
 * `sol` must be a live handle and `out` writable.
 */
enum FracflowStatus fracflow_solution_value(const struct FracflowSolution *sol,
                                            size_t index,
                                            size_t k,
                                            size_t mode,
                                            double *out);

/**
 * Largest fixed-point residual among the returned solutions.
 *
 * # Safety
 * `sol` must be a live handle.
 */
double fracflow_solution_max_residual(const struct FracflowSolution *sol);

/**
 * # Safety
 * `sol` must be null or a handle not yet freed.
 */
void fracflow_solution_free(struct FracflowSolution *sol);

/**
 * Scalar pathwise integral of `g` against `w` over all `n_nodes` grid nodes
 * spaced `dt` apart.
 *
 * # Safety
 * `g` and `w` must each point to `n_nodes` readable doubles; `out` writable.
 */
enum FracflowStatus fracflow_integrate_scalar(const double *g,
                                              const double *w,
                                              size_t n_nodes,
                                              double dt,
                                              double alpha,
                                              enum FracflowScheme scheme,
                                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACFLOW_H */
