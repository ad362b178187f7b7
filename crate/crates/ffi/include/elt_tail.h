#ifndef ELT_TAIL_H
#define ELT_TAIL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EltStatus {
  ELT_STATUS_OK = 0,
  ELT_STATUS_NULL_POINTER = 1,
  ELT_STATUS_INVALID_UTF8 = 2,
  ELT_STATUS_PARSE = 3,
  ELT_STATUS_VALIDATION = 4,
  ELT_STATUS_UNSUPPORTED = 5,
  ELT_STATUS_DOMAIN = 6,
  ELT_STATUS_NUMERIC = 7,
  ELT_STATUS_IO = 8,
  ELT_STATUS_PANIC = 9,
} EltStatus;

typedef enum EltBound {
  ELT_BOUND_MARKOV = 0,
  ELT_BOUND_CANTELLI = 1,
  ELT_BOUND_MOMENT = 2,
  ELT_BOUND_CHERNOFF = 3,
} EltBound;

/**
 * Opaque compound Poisson model plus the currency value of its loss unit.
 */
typedef struct EltModel EltModel;

/**
 * Opaque event loss table.
 */
typedef struct EltTable EltTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *elt_last_error(void);

/**
 * Parses CSV text (NUL-terminated) into a new table.
 *
 * # Safety
 * `csv` must be a valid C string and `out` a writable pointer.
 */
enum EltStatus elt_table_parse_csv(const char *csv, struct EltTable **out);

/**
 * Reads a CSV file into a new table.
 *
 * # Safety
 * `path` must be a valid C string and `out` a writable pointer.
 */
enum EltStatus elt_table_read_file(const char *path, struct EltTable **out);

/**
 * # Safety
 * `table` must come from this library and not be used afterwards.
 */
void elt_table_free(struct EltTable *table);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t elt_table_rows(const struct EltTable *table);

/**
 * Sum of row rates, or NaN for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
double elt_table_total_rate(const struct EltTable *table);

/**
 * Currency value of one stored loss unit, or NaN for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
double elt_table_loss_unit(const struct EltTable *table);

/**
 * Rounds losses to `d` decimal places and merges equal-loss rows.
 *
 * # Safety
 * `table` must be a live handle and `out` a writable pointer.
 */
enum EltStatus elt_table_compress(const struct EltTable *table, int32_t d, struct EltTable **out);

/**
 * Replaces fixed losses by Gamma losses with coefficient of variation `theta`.
 *
 * # Safety
 * `table` must be a live handle and `out` a writable pointer.
 */
enum EltStatus elt_table_thicken(const struct EltTable *table, double theta, struct EltTable **out);

/**
 * Caps every event loss at `cap` currency units.
 *
 * # Safety
 * `table` must be a live handle and `out` a writable pointer.
 */
enum EltStatus elt_table_with_cap(const struct EltTable *table, double cap, struct EltTable **out);

/**
 * Builds the compound Poisson model for horizon `t` years.
 *
 * # Safety
 * `table` must be a live handle and `out` a writable pointer.
 */
enum EltStatus elt_model_new(const struct EltTable *table, double t, struct EltModel **out);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void elt_model_free(struct EltModel *model);

/**
 * Mean of the aggregate loss in currency units.
 *
 * # Safety
 * `model` must be a live handle and `out` a writable pointer.
 */
enum EltStatus elt_model_mean(const struct EltModel *model, double *out);

/**
 * Variance of the aggregate loss in squared currency units.
 *
 * # Safety
 * `model` must be a live handle and `out` a writable pointer.
 */
enum EltStatus elt_model_variance(const struct EltModel *model, double *out);

/**
 * Raw aggregate moments `E(S^0) .. E(S^k_max)` in stored loss units;
 * `out` holds `k_max + 1` values.
 *
 * # Safety
 * `model` must be a live handle and `out` must have room for `k_max + 1`
 * doubles.
 */
enum EltStatus elt_model_moments(const struct EltModel *model, uint32_t k_max, double *out);

/**
 * Upper bounds on Pr(S >= s) at `n` ascending positive thresholds.
 *
 * # Safety
 * `thresholds` and `out` must each hold `n` doubles.
 */
enum EltStatus elt_bound(const struct EltModel *model,
                         enum EltBound method,
                         const double *thresholds,
                         size_t n,
                         double *out);

/**
 * Monte Carlo estimates with 95% Jeffreys intervals at `n` thresholds.
 * `lower` and `upper` may be null.
 *
 * # Safety
 * `thresholds` and `estimate` must hold `n` doubles; `lower`/`upper` must
 * be null or hold `n` doubles.
 */
enum EltStatus elt_monte_carlo(const struct EltModel *model,
                               const double *thresholds,
                               size_t n,
                               size_t nsim,
                               uint64_t seed,
                               double *estimate,
                               double *lower,
                               double *upper);

/**
 * Pr(S >= s) by Panjer recursion after quantile expansion (`n_q` rows per
 * random loss) and compression at `d`, for horizon `t` years.
 *
 * # Safety
 * `table` must be a live handle; `thresholds` and `out` must hold `n`
 * doubles.
 */
enum EltStatus elt_panjer(const struct EltTable *table,
                          double t,
                          int32_t d,
                          size_t n_q,
                          const double *thresholds,
                          size_t n,
                          double *out);

/**
 * Probability that the Jeffreys upper end stays at or below `kappa0`
 * when the true probability is `p0`, for each of `n` sample sizes.
 *
 * # Safety
 * `sizes` and `out` must each hold `n` elements.
 */
enum EltStatus elt_design_success(double kappa0,
                                  double p0,
                                  double alpha_level,
                                  const uint64_t *sizes,
                                  size_t n,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELT_TAIL_H */
