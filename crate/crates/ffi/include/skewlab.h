#ifndef SKEWLAB_H
#define SKEWLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SkewlabStatus {
  SKEWLAB_STATUS_OK = 0,
  SKEWLAB_STATUS_NULL_POINTER = 1,
  SKEWLAB_STATUS_INVALID_UTF8 = 2,
  /**
   * Invalid configuration, precondition or argument.
   */
  SKEWLAB_STATUS_CONFIG = 3,
  /**
   * The computation failed: blow-up, no convergence, scheme violation.
   */
  SKEWLAB_STATUS_NUMERICAL = 4,
  SKEWLAB_STATUS_BUFFER_TOO_SMALL = 5,
  SKEWLAB_STATUS_OUT_OF_RANGE = 6,
  SKEWLAB_STATUS_PANIC = 7,
} SkewlabStatus;

/**
 * Experiment handle.
 */
typedef struct SkewlabModel SkewlabModel;

/**
 * Recorded `ln c(t, p)` series.
 */
typedef struct SkewlabTrace SkewlabTrace;

typedef struct SkewlabExponent {
  double value;
  double horizon;
  /**
   * Difference between the full-horizon and half-horizon estimates.
   */
  double gap;
} SkewlabExponent;

typedef struct SkewlabPullback {
  double b_norm;
  double min_b;
  double horizon;
  double cauchy_gap;
  bool converged;
} SkewlabPullback;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *skewlab_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *skewlab_version(void);

/**
 * Parse and validate a TOML experiment document. On success `*out` owns a
 * new handle that must be released with [`skewlab_model_free`].
 */
enum SkewlabStatus skewlab_model_from_toml(const char *toml, struct SkewlabModel **out);

/**
 * Release a handle. Null is ignored.
 */
void skewlab_model_free(struct SkewlabModel *model);

/**
 * Config hash of the model, valid while the handle lives. Null for a null
 * handle.
 */
const char *skewlab_model_config_hash(const struct SkewlabModel *model);

/**
 * Number of grid nodes, `n_cells + 1`.
 */
enum SkewlabStatus skewlab_model_node_count(const struct SkewlabModel *model, size_t *out);

/**
 * First eigenvalue and, when `e0` is not null, the eigenfield normalized to
 * sup-norm one. `e0` must hold `len >= node count` values.
 */
enum SkewlabStatus skewlab_first_eigenpair(const struct SkewlabModel *model,
                                           double *gamma0,
                                           double *e0,
                                           size_t len);

/**
 * Upper Lyapunov exponent of `gamma + h` from the base point
 * `(theta1, theta2)` over `horizon`.
 */
enum SkewlabStatus skewlab_lyapunov(const struct SkewlabModel *model,
                                    double theta1,
                                    double theta2,
                                    double horizon,
                                    struct SkewlabExponent *out);

/**
 * Record `ln c(t, p)` of `gamma + h` over `horizon`. Release the trace with
 * [`skewlab_trace_free`].
 */
enum SkewlabStatus skewlab_trace_new(const struct SkewlabModel *model,
                                     double theta1,
                                     double theta2,
                                     double horizon,
                                     struct SkewlabTrace **out);

/**
 * Number of records, zero for a null trace.
 */
size_t skewlab_trace_len(const struct SkewlabTrace *trace);

/**
 * Record `index`: its time and `ln c`.
 */
enum SkewlabStatus skewlab_trace_get(const struct SkewlabTrace *trace,
                                     size_t index,
                                     double *t,
                                     double *log_c);

void skewlab_trace_free(struct SkewlabTrace *trace);

/**
 * Upper boundary `b(p)` of the pullback attractor at `(theta1, theta2)`.
 * When `b` is not null it receives `len >= node count` values.
 */
enum SkewlabStatus skewlab_pullback(const struct SkewlabModel *model,
                                    double theta1,
                                    double theta2,
                                    double *b,
                                    size_t len,
                                    struct SkewlabPullback *out);

/**
 * Positive equilibrium of `y' = gamma y - k (y - r0)^3`; all parameters
 * must be positive.
 */
enum SkewlabStatus skewlab_homogeneous_oracle(double gamma, double k, double r0, double *out);

/**
 * Torus rotation: `out = theta + t omega` modulo one.
 */
enum SkewlabStatus skewlab_advance(const double *theta, const double *omega, double t, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKEWLAB_H */
