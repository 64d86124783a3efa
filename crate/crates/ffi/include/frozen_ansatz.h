#ifndef FROZEN_ANSATZ_H
#define FROZEN_ANSATZ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FaStatus {
  FA_STATUS_OK = 0,
  FA_STATUS_NULL_POINTER = 1,
  FA_STATUS_INVALID_ARGUMENT = 2,
  FA_STATUS_IO = 3,
  FA_STATUS_MALFORMED = 4,
  FA_STATUS_VERSION_MISMATCH = 5,
  FA_STATUS_INVARIANT_VIOLATION = 6,
  FA_STATUS_COMPUTATION = 7,
  FA_STATUS_BUFFER_TOO_SMALL = 8,
  FA_STATUS_PANIC = 9,
} FaStatus;

typedef enum FaObjective {
  FA_OBJECTIVE_SAMPLED = 0,
  FA_OBJECTIVE_EXACT = 1,
} FaObjective;

/**
 * Opaque TSP instance.
 */
typedef struct FaInstance FaInstance;

/**
 * Opaque frozen model.
 */
typedef struct FaModel FaModel;

/**
 * Mirror of the library's annealing configuration.
 */
typedef struct FaSaConfig {
  double t0;
  double cooling;
  double t_min;
  size_t max_iter;
  size_t fitness_runs;
  size_t restarts;
  size_t n_samples;
  size_t n_keep;
  uint32_t shots;
  double powell_ftol;
  size_t powell_max_iter;
  double line_tol;
  enum FaObjective objective;
  uint64_t seed;
} FaSaConfig;

/**
 * Shot-based evaluation of a model without re-optimization.
 */
typedef struct FaEnergy {
  double mean_cost;
  double cost_std;
  double p_opt;
  uint64_t best_cost;
} FaEnergy;

/**
 * One reuse evaluation.
 */
typedef struct FaRunRecord {
  size_t n;
  uint32_t instance;
  double p_opt;
  double mean_cost;
  uint64_t best_sampled_cost;
  uint64_t exact_cost;
  double wall_time;
} FaRunRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (nul-terminated,
 * truncated to `len`). Returns the full message length excluding the nul, or
 * 0 if the last call succeeded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t fa_last_error_message(char *buf, size_t len);

/**
 * Library version as a static nul-terminated string.
 */
const char *fa_version(void);

/**
 * Qubits needed for `n` cities, or 0 when `n` is unsupported.
 */
size_t fa_qubits_for(size_t n);

/**
 * Fill `out` with the reference configuration.
 *
 * # Safety
 * `out` must be null or a valid pointer.
 */
enum FaStatus fa_sa_config_default(struct FaSaConfig *out);

/**
 * # Safety
 * `out` must be null or a valid pointer.
 */
enum FaStatus fa_instance_generate(size_t n,
                                   uint64_t seed,
                                   uint32_t index,
                                   struct FaInstance **out);

/**
 * Build an instance from a row-major `n × n` matrix.
 *
 * # Safety
 * `dist` must point to `n * n` readable values; `out` must be valid.
 */
enum FaStatus fa_instance_from_matrix(size_t n,
                                      const uint32_t *dist,
                                      uint64_t seed,
                                      uint32_t index,
                                      struct FaInstance **out);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be valid.
 */
enum FaStatus fa_instance_load(const char *path, struct FaInstance **out);

/**
 * # Safety
 * `inst` must be a live handle; `path` a nul-terminated string.
 */
enum FaStatus fa_instance_save(const struct FaInstance *inst, const char *path);

/**
 * # Safety
 * `inst` must be null or a handle not yet freed.
 */
void fa_instance_free(struct FaInstance *inst);

/**
 * City count, or 0 for a null handle.
 *
 * # Safety
 * `inst` must be null or a live handle.
 */
size_t fa_instance_size(const struct FaInstance *inst);

/**
 * Distance between 0-based cities `i` and `j`.
 *
 * # Safety
 * `inst` must be a live handle; `out` valid.
 */
enum FaStatus fa_instance_distance(const struct FaInstance *inst,
                                   size_t i,
                                   size_t j,
                                   uint32_t *out);

/**
 * # Safety
 * `order` must point to `len` readable labels; `out` valid.
 */
enum FaStatus fa_tour_cost(const struct FaInstance *inst,
                           const size_t *order,
                           size_t len,
                           uint64_t *out);

/**
 * Exhaustive optimum (n <= 10). Writes `n` labels into `order_out`.
 *
 * # Safety
 * `order_out` must have room for `len` values; `cost_out` valid.
 */
enum FaStatus fa_solve_exact(const struct FaInstance *inst,
                             size_t *order_out,
                             size_t len,
                             uint64_t *cost_out);

/**
 * Classical annealing baseline with the reference schedule.
 *
 * # Safety
 * As [`fa_solve_exact`].
 */
enum FaStatus fa_classical_baseline(const struct FaInstance *inst,
                                    uint64_t seed,
                                    size_t *order_out,
                                    size_t len,
                                    uint64_t *cost_out);

/**
 * Unrank `value` into a tour of `n` cities.
 *
 * # Safety
 * `order_out` must have room for `len` values.
 */
enum FaStatus fa_perm_decode(uint64_t value, size_t n, size_t *order_out, size_t len);

/**
 * # Safety
 * `order` must point to `len` readable labels; `out` valid.
 */
enum FaStatus fa_perm_encode(const size_t *order, size_t len, uint64_t *out);

/**
 * Anneal a topology on `inst` and return the frozen model. `cfg` may be null
 * for the reference configuration.
 *
 * # Safety
 * `inst` must be a live handle, `cfg` null or valid, `out` valid.
 */
enum FaStatus fa_train(const struct FaInstance *inst,
                       const struct FaSaConfig *cfg,
                       struct FaModel **out);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` valid.
 */
enum FaStatus fa_model_load(const char *path, struct FaModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` a nul-terminated string.
 */
enum FaStatus fa_model_save(const struct FaModel *model, const char *path);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void fa_model_free(struct FaModel *model);

/**
 * City count the model was trained for, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t fa_model_cities(const struct FaModel *model);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
size_t fa_model_qubits(const struct FaModel *model);

/**
 * Training fitness, or NaN for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
double fa_model_fitness(const struct FaModel *model);

/**
 * Copy the model's `3 * qubits` angles into `out`.
 *
 * # Safety
 * `out` must have room for `len` doubles.
 */
enum FaStatus fa_model_params(const struct FaModel *model, double *out, size_t len);

/**
 * Write the block names as a nul-terminated, comma-separated string
 * (e.g. `rz,full,rz,linear,rz`). `needed` receives the byte length
 * including the nul.
 *
 * # Safety
 * `buf` must have room for `len` bytes; `needed` null or valid.
 */
enum FaStatus fa_model_blocks(const struct FaModel *model, char *buf, size_t len, size_t *needed);

/**
 * Sample the model's circuit on `inst` with its stored angles.
 *
 * # Safety
 * Handles must be live; `out` valid.
 */
enum FaStatus fa_model_evaluate(const struct FaModel *model,
                                const struct FaInstance *inst,
                                uint32_t shots,
                                uint64_t seed,
                                struct FaEnergy *out);

/**
 * Re-optimize the model's angles on `inst` (topology untouched) and report
 * the optimal-tour frequency. `cfg` may be null to reuse the training config.
 *
 * # Safety
 * Handles must be live, `cfg` null or valid, `out` valid.
 */
enum FaStatus fa_reuse(const struct FaModel *model,
                       const struct FaInstance *inst,
                       const struct FaSaConfig *cfg,
                       struct FaRunRecord *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FROZEN_ANSATZ_H */
