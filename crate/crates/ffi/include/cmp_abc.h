#ifndef CMP_ABC_H
#define CMP_ABC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CmpAbcStatus {
  CMP_ABC_STATUS_OK = 0,
  CMP_ABC_STATUS_NULL_POINTER = 1,
  CMP_ABC_STATUS_INVALID_ARGUMENT = 2,
  CMP_ABC_STATUS_CONFIG = 3,
  CMP_ABC_STATUS_DATA = 4,
  CMP_ABC_STATUS_NUMERIC = 5,
  CMP_ABC_STATUS_IO = 6,
  CMP_ABC_STATUS_PANIC = 7,
} CmpAbcStatus;

typedef enum CmpAbcClusterKind {
  CMP_ABC_CLUSTER_KIND_KMEANS = 0,
  CMP_ABC_CLUSTER_KIND_IGMM = 1,
} CmpAbcClusterKind;

typedef struct CmpAbcClusters CmpAbcClusters;

typedef struct CmpAbcNetwork CmpAbcNetwork;

typedef struct CmpAbcRegression CmpAbcRegression;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cmpabc_version(void);

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * failing call on the same thread.
 */
const char *cmpabc_last_error(void);

/**
 * Mean, standard deviation, skewness and kurtosis of `series` into `out[4]`.
 *
 * # Safety
 * `series` points to `len` doubles and `out` to 4 writable doubles.
 */
enum CmpAbcStatus cmpabc_moments(const double *series, size_t len, double *out);

/**
 * Randomly initialized autoencoder with encoder layer sizes `sizes[0..n]`.
 *
 * # Safety
 * `sizes` points to `n` values and `out` is writable.
 */
enum CmpAbcStatus cmpabc_network_new(const size_t *sizes,
                                     size_t n,
                                     uint64_t seed,
                                     struct CmpAbcNetwork **out);

/**
 * Loads a checkpoint written by `cmpabc_network_save` or the `train` command.
 *
 * # Safety
 * `path` is a NUL-terminated string and `out` is writable.
 */
enum CmpAbcStatus cmpabc_network_load(const char *path, struct CmpAbcNetwork **out);

/**
 * # Safety
 * `net` is a live handle and `path` a NUL-terminated string.
 */
enum CmpAbcStatus cmpabc_network_save(const struct CmpAbcNetwork *net, const char *path);

/**
 * Input and latent widths of `net`.
 *
 * # Safety
 * `net` is a live handle; the output pointers are writable.
 */
enum CmpAbcStatus cmpabc_network_dims(const struct CmpAbcNetwork *net,
                                      size_t *input_dim,
                                      size_t *latent_dim);

/**
 * Encodes `x[0..x_len]` into `z[0..z_len]`; both lengths must match the network.
 *
 * # Safety
 * `net` is a live handle; `x` and `z` cover their stated lengths.
 */
enum CmpAbcStatus cmpabc_network_encode(const struct CmpAbcNetwork *net,
                                        const double *x,
                                        size_t x_len,
                                        double *z,
                                        size_t z_len);

/**
 * # Safety
 * `net` is NULL or a handle not yet freed.
 */
void cmpabc_network_free(struct CmpAbcNetwork *net);

/**
 * Least squares with ridge `lambda` on a row-major `n x d` matrix.
 *
 * # Safety
 * `x` holds `n * d` doubles, `y` holds `n`, and `out` is writable.
 */
enum CmpAbcStatus cmpabc_regression_fit(const double *x,
                                        size_t n,
                                        size_t d,
                                        const double *y,
                                        double lambda,
                                        struct CmpAbcRegression **out);

/**
 * Predictions for a row-major `n x d` matrix into `out[0..n]`.
 *
 * # Safety
 * `model` is a live handle; `x` holds `n * d` doubles and `out` `n`.
 */
enum CmpAbcStatus cmpabc_regression_predict(const struct CmpAbcRegression *model,
                                            const double *x,
                                            size_t n,
                                            size_t d,
                                            double *out);

/**
 * Copies the coefficients into `coef[0..d]` and the intercept into `intercept`.
 *
 * # Safety
 * `model` is a live handle; the output pointers cover their lengths.
 */
enum CmpAbcStatus cmpabc_regression_coefficients(const struct CmpAbcRegression *model,
                                                 double *coef,
                                                 size_t d,
                                                 double *intercept);

/**
 * # Safety
 * `model` is NULL or a handle not yet freed.
 */
void cmpabc_regression_free(struct CmpAbcRegression *model);

/**
 * Fits `k` clusters (the initial `T` for iGMM) to a row-major `n x d`
 * matrix. iGMM prunes below `1 / (10 k)`.
 *
 * # Safety
 * `z` holds `n * d` doubles and `out` is writable.
 */
enum CmpAbcStatus cmpabc_clusters_fit(enum CmpAbcClusterKind kind,
                                      const double *z,
                                      size_t n,
                                      size_t d,
                                      size_t k,
                                      uint64_t seed,
                                      size_t max_iter,
                                      struct CmpAbcClusters **out);

/**
 * Number of clusters still active.
 *
 * # Safety
 * `model` is a live handle and `out` is writable.
 */
enum CmpAbcStatus cmpabc_clusters_count(const struct CmpAbcClusters *model, size_t *out);

/**
 * Index of the cluster `z[0..d]` is assigned to.
 *
 * # Safety
 * `model` is a live handle, `z` holds `d` doubles and `out` is writable.
 */
enum CmpAbcStatus cmpabc_clusters_nearest(const struct CmpAbcClusters *model,
                                          const double *z,
                                          size_t d,
                                          size_t *out);

/**
 * # Safety
 * `model` is NULL or a handle not yet freed.
 */
void cmpabc_clusters_free(struct CmpAbcClusters *model);

/**
 * Runs the full experiment described by `config_text` (the `key = value`
 * format of the command-line tool) and writes the report files to `out_dir`.
 * The files are written even when an attempt fails.
 *
 * # Safety
 * Both arguments are NUL-terminated strings.
 */
enum CmpAbcStatus cmpabc_run_experiment(const char *config_text, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CMP_ABC_H */
