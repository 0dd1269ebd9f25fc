#ifndef DOC3_H
#define DOC3_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DOC3_OK 0

/**
 * A required pointer argument was null.
 */
#define DOC3_ERR_NULL 1

/**
 * Invalid argument, shape or configuration.
 */
#define DOC3_ERR_INVALID 2

/**
 * Numerical failure: divergence, non-convergence, infeasibility, undefined statistic.
 */
#define DOC3_ERR_NUMERIC 3

/**
 * File access or model format problem.
 */
#define DOC3_ERR_IO 4

/**
 * Internal panic caught at the boundary.
 */
#define DOC3_ERR_PANIC 5

#define DOC3_OBJECTIVE_DOC 0

#define DOC3_OBJECTIVE_DOC3 1

#define DOC3_OBJECTIVE_BINARY 2

#define DOC3_LOSS_HINGE 0

#define DOC3_LOSS_SOFTPLUS 1

#define DOC3_OPTIMIZER_SGD 0

#define DOC3_OPTIMIZER_ADAM 1

/**
 * Opaque trained model.
 */
typedef struct Doc3Model Doc3Model;

/**
 * Training settings. Obtain defaults from `doc3_train_params_default`.
 */
typedef struct Doc3TrainParams {
  double c;
  double c_u;
  double delta;
  double cost_ratio;
  /**
   * `DOC3_LOSS_*`.
   */
  int32_t loss;
  /**
   * `DOC3_OPTIMIZER_*`.
   */
  int32_t optimizer;
  double learning_rate;
  size_t iterations;
  size_t batch_train;
  size_t batch_univ;
  uint64_t seed;
  /**
   * Hidden layer widths; empty (null / 0) means the identity map.
   */
  const size_t *hidden_widths;
  size_t n_hidden;
  uint64_t model_seed;
} Doc3TrainParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or an empty string.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *doc3_last_error(void);

/**
 * Loads a model from its text format.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
int32_t doc3_model_load(const char *path, struct Doc3Model **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated string.
 */
int32_t doc3_model_save(const struct Doc3Model *model, const char *path);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not freed before.
 */
void doc3_model_free(struct Doc3Model *model);

/**
 * Input dimension of the model, 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t doc3_model_input_dim(const struct Doc3Model *model);

/**
 * Decision threshold: 1 for one-class models, 0 for the binary baseline.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
int32_t doc3_model_threshold(const struct Doc3Model *model, double *out);

/**
 * Scores `f(x)` of `rows` inputs of width `cols` into `out[rows]`.
 *
 * # Safety
 * `x` must hold `rows * cols` doubles and `out` room for `rows`.
 */
int32_t doc3_model_scores(const struct Doc3Model *model,
                          const double *x,
                          size_t rows,
                          size_t cols,
                          double *out);

/**
 * Labels (+1 normal, -1 anomaly) of `rows` inputs into `out[rows]`.
 *
 * # Safety
 * `x` must hold `rows * cols` doubles and `out` room for `rows`.
 */
int32_t doc3_model_decide(const struct Doc3Model *model,
                          const double *x,
                          size_t rows,
                          size_t cols,
                          int8_t *out);

struct Doc3TrainParams doc3_train_params_default(void);

/**
 * Trains a model. `objective` is one of `DOC3_OBJECTIVE_*`; `u` (the
 * universum, or the negative class for the binary baseline) may be null
 * for DOC.
 *
 * # Safety
 * `x` must hold `n * d` doubles, `u` null or `m * d` doubles, `params` a
 * valid struct and `out` writable.
 */
int32_t doc3_train(int32_t objective,
                   const double *x,
                   size_t n,
                   const double *u,
                   size_t m,
                   size_t d,
                   const struct Doc3TrainParams *params,
                   struct Doc3Model **out);

/**
 * Area under the ROC curve of normal scores `pos` against anomaly scores `neg`.
 *
 * # Safety
 * `pos` and `neg` must hold `n_pos` and `n_neg` doubles, `out` writable.
 */
int32_t doc3_auc(const double *pos, size_t n_pos, const double *neg, size_t n_neg, double *out);

/**
 * Train/universum correlation `Σ(∞)` of feature matrices `z` (n×p) and `u` (m×p).
 *
 * # Safety
 * `z`, `u` must hold `n * p` and `m * p` doubles, `out` writable.
 */
int32_t doc3_sigma_inf(const double *z, size_t n, const double *u, size_t m, size_t p, double *out);

/**
 * Rademacher-complexity bound of the norm ball `‖w‖ ≤ lambda_cap` on `z`.
 *
 * # Safety
 * `z` must hold `n * p` doubles, `out` writable.
 */
int32_t doc3_erc_bound_ind(const double *z, size_t n, size_t p, double lambda_cap, double *out);

/**
 * Bound for the universum-restricted class, minimized over the default γ
 * grid. The minimizing γ goes to `out_gamma` when it is non-null.
 *
 * # Safety
 * `z`, `u` must hold `n * p` and `m * p` doubles, `out_bound` writable,
 * `out_gamma` null or writable.
 */
int32_t doc3_erc_bound_univ(const double *z,
                            size_t n,
                            const double *u,
                            size_t m,
                            size_t p,
                            double lambda_cap,
                            double delta,
                            double *out_bound,
                            double *out_gamma);

/**
 * Solves the linear one-class hinge dual at `c` on `x` (n×d) and maps it to
 * the equivalent ν-SVM: writes `ν`, `ρ` and `ŵ[d]`.
 *
 * # Safety
 * `x` must hold `n * d` doubles; `out_nu`, `out_rho` writable and
 * `out_w_hat` room for `d` doubles.
 */
int32_t doc3_dual_to_nu(const double *x,
                        size_t n,
                        size_t d,
                        double c,
                        double *out_nu,
                        double *out_rho,
                        double *out_w_hat);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOC3_H */
