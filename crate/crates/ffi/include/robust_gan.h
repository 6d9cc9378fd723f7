#ifndef ROBUST_GAN_H
#define ROBUST_GAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum RgStatus {
  RG_STATUS_OK = 0,
  RG_STATUS_NULL_POINTER = 1,
  /**
   * Bad value or shape.
   */
  RG_STATUS_INVALID_ARGUMENT = 2,
  RG_STATUS_CONFIG = 3,
  /**
   * Every restart diverged.
   */
  RG_STATUS_NUMERICAL = 4,
  RG_STATUS_UNSUPPORTED = 5,
  RG_STATUS_IO = 6,
  RG_STATUS_PANIC = 7,
} RgStatus;

/**
 * Distance used by the estimators.
 */
typedef enum RgDistance {
  RG_DISTANCE_A1 = 1,
  RG_DISTANCE_A2 = 2,
  RG_DISTANCE_A3 = 3,
} RgDistance;

/**
 * Estimator settings.
 */
typedef struct RgConfig RgConfig;

/**
 * Samples, optionally with regression responses.
 */
typedef struct RgDataset RgDataset;

/**
 * Output of a robust estimation.
 */
typedef struct RgEstimate RgEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *rg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rg_version(void);

/**
 * Copies `n * d` row-major points (and `n` responses when `responses` is
 * not null) into a new dataset.
 *
 * # Safety
 * `points` must be readable for `n * d` values, `responses` (if not null)
 * for `n` values, and `out` writable.
 */
enum RgStatus rg_dataset_new(const double *points,
                             size_t n,
                             size_t d,
                             const double *responses,
                             struct RgDataset **out);

/**
 * `n` draws from `N(0, sigma^2 I_d)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum RgStatus rg_dataset_sample_gaussian(size_t n,
                                         size_t d,
                                         double sigma,
                                         uint64_t seed,
                                         struct RgDataset **out);

/**
 * Replaces a fraction `eps` of the rows with a point mass at distance
 * `magnitude` along the first axis.
 *
 * # Safety
 * `data` must be a live dataset handle and `out` writable.
 */
enum RgStatus rg_dataset_corrupt_point_mass(const struct RgDataset *data,
                                            double eps,
                                            double magnitude,
                                            uint64_t seed,
                                            struct RgDataset **out);

/**
 * # Safety
 * `data` must be a live dataset handle.
 */
size_t rg_dataset_rows(const struct RgDataset *data);

/**
 * # Safety
 * `data` must be a live dataset handle.
 */
size_t rg_dataset_dim(const struct RgDataset *data);

/**
 * # Safety
 * `data` must be null or a handle not yet freed.
 */
void rg_dataset_free(struct RgDataset *data);

/**
 * Default estimator settings.
 *
 * # Safety
 * `out` must be writable.
 */
enum RgStatus rg_config_new(struct RgConfig **out);

/**
 * Settings from a TOML table with the fields of the `[minimax]` section of
 * a sweep config. Unknown keys are errors.
 *
 * # Safety
 * `toml_text` must be a NUL-terminated string and `out` writable.
 */
enum RgStatus rg_config_from_toml(const char *toml_text, struct RgConfig **out);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum RgStatus rg_config_set_distance(struct RgConfig *cfg, enum RgDistance distance);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum RgStatus rg_config_set_outer_steps(struct RgConfig *cfg, size_t steps);

/**
 * Contamination level assumed by the robust initializers.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum RgStatus rg_config_set_eps(struct RgConfig *cfg, double eps);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum RgStatus rg_config_set_seed(struct RgConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void rg_config_free(struct RgConfig *cfg);

/**
 * Robust mean; the estimate has `d` entries.
 *
 * # Safety
 * `data` and `cfg` must be live handles and `out` writable.
 */
enum RgStatus rg_robust_mean(const struct RgDataset *data,
                             const struct RgConfig *cfg,
                             struct RgEstimate **out);

/**
 * Robust second moment; the estimate has `d * d` entries, row-major.
 *
 * # Safety
 * `data` and `cfg` must be live handles and `out` writable.
 */
enum RgStatus rg_robust_second_moment(const struct RgDataset *data,
                                      const struct RgConfig *cfg,
                                      struct RgEstimate **out);

/**
 * Robust regression coefficients; the dataset needs responses.
 *
 * # Safety
 * `data` and `cfg` must be live handles and `out` writable.
 */
enum RgStatus rg_robust_regression(const struct RgDataset *data,
                                   const struct RgConfig *cfg,
                                   struct RgEstimate **out);

/**
 * Number of entries in the estimate.
 *
 * # Safety
 * `est` must be a live estimate handle.
 */
size_t rg_estimate_len(const struct RgEstimate *est);

/**
 * Copies the estimate into `buf`, which must hold `rg_estimate_len`
 * values (`len` is checked).
 *
 * # Safety
 * `est` must be a live estimate handle and `buf` writable for `len` values.
 */
enum RgStatus rg_estimate_copy(const struct RgEstimate *est, double *buf, size_t len);

/**
 * Final adversarial distance between the data and the fitted generator.
 *
 * # Safety
 * `est` must be a live estimate handle.
 */
double rg_estimate_distance_value(const struct RgEstimate *est);

/**
 * # Safety
 * `est` must be null or a handle not yet freed.
 */
void rg_estimate_free(struct RgEstimate *est);

/**
 * Adversarial distance between two point sets (mean features), with the
 * default ascent settings.
 *
 * # Safety
 * `p` and `q` must be live dataset handles and `out` writable.
 */
enum RgStatus rg_distance(enum RgDistance distance,
                          const struct RgDataset *p,
                          const struct RgDataset *q,
                          uint64_t seed,
                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBUST_GAN_H */
