#ifndef SURVANCHOR_H
#define SURVANCHOR_H

/* Generated with cbindgen:0.26.0 */

/* Generated from the Rust sources by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Mixture families for `sa_cluster_json` and `sa_cluster_anchors_json`.
 */
typedef enum SaMixtureKind {
  /**
   * Von Mises-Fisher components on the unit sphere.
   */
  SA_MIXTURE_KIND_VMF = 0,
  /**
   * Spherical Gaussian components.
   */
  SA_MIXTURE_KIND_GAUSSIAN = 1,
} SaMixtureKind;

/**
 * Result of every fallible call in this interface.
 */
typedef enum SaStatus {
  /**
   * The call succeeded and all output parameters are filled in.
   */
  SA_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SA_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SA_STATUS_INVALID_UTF8 = 2,
  /**
   * An argument value was rejected; see `sa_last_error`.
   */
  SA_STATUS_INVALID_ARGUMENT = 3,
  /**
   * Reading or writing a file failed.
   */
  SA_STATUS_IO_ERROR = 4,
  /**
   * A numerical routine failed; see `sa_last_error`.
   */
  SA_STATUS_NUMERIC_ERROR = 5,
  /**
   * The library panicked internally; state may be inconsistent.
   */
  SA_STATUS_PANIC = 6,
} SaStatus;

/**
 * Embedding bundle handle: unit embeddings with row ids and optional
 * survival labels.
 */
typedef struct SaBundle SaBundle;

/**
 * Survival dataset handle: feature matrix, ids, times, and event flags.
 */
typedef struct SaDataset SaDataset;

/**
 * Trained survival model handle: network, standardizer, and baseline
 * hazard.
 */
typedef struct SaModel SaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; never freed by the caller.
 */
const char *sa_version(void);

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread; never
 * freed by the caller.
 */
const char *sa_last_error(void);

/**
 * Releases a string returned through a `char **` output parameter.
 */
void sa_string_free(char *ptr);

/**
 * Generates the synthetic benchmark dataset: `groups` risk groups with
 * distinct mean survival times, Gaussian feature clouds in `dim`
 * dimensions, and uniform right-censoring. `groups` must be between 1
 * and 10.
 */
enum SaStatus sa_dataset_synthetic(size_t n,
                                   size_t groups,
                                   size_t dim,
                                   double time_variance,
                                   double center_radius,
                                   double feature_spread,
                                   double censor_quantile,
                                   uint64_t seed,
                                   struct SaDataset **out_dataset);

/**
 * Loads a survival dataset from a CSV file. `spec_json` describes the
 * columns, e.g. `{"time_column":"time","event_column":"event",
 * "id_column":"id","features":[["age","continuous"],["sex","indicator"]]}`.
 */
enum SaStatus sa_dataset_from_csv(const char *path,
                                  const char *spec_json,
                                  struct SaDataset **out_dataset);

/**
 * Number of rows in the dataset; 0 when the handle is null.
 */
size_t sa_dataset_rows(const struct SaDataset *dataset);

/**
 * Number of feature columns in the dataset; 0 when the handle is null.
 */
size_t sa_dataset_dim(const struct SaDataset *dataset);

/**
 * Releases a dataset handle; null is ignored.
 */
void sa_dataset_free(struct SaDataset *dataset);

/**
 * Trains a survival model on the dataset, splitting rows internally.
 *
 * `config_json`, when non-null, is the full training configuration:
 * `{"batch_sizes":[64],"learning_rates":[0.01],"layer_counts":[2],
 * "embed_dims":[6],"max_epochs":100,"patience":10,
 * "final_activation":"unit_norm","seed":0}`; every listed combination is
 * tried and the best validation concordance wins. When null, a small
 * default grid with the given `seed` is used (the `seed` argument is
 * ignored otherwise). `fractions`, when non-null, must point at 4 values
 * summing to 1.
 */
enum SaStatus sa_train(const struct SaDataset *dataset,
                       const char *config_json,
                       const double *fractions,
                       uint64_t seed,
                       struct SaModel **out_model);

/**
 * Writes the model as JSON to `path`.
 */
enum SaStatus sa_model_save(const struct SaModel *model, const char *path);

/**
 * Loads a model previously written by `sa_model_save`.
 */
enum SaStatus sa_model_load(const char *path, struct SaModel **out_model);

/**
 * Width of the embedding the model produces; 0 when the handle is null.
 */
size_t sa_model_embed_dim(const struct SaModel *model);

/**
 * Concordance index the selected configuration reached on the validation
 * split; NaN when the handle is null.
 */
double sa_model_val_concordance(const struct SaModel *model);

/**
 * Risk score of one feature row (higher means shorter expected
 * survival). `row` must hold exactly the dataset's feature count in
 * schema order.
 */
enum SaStatus sa_model_score(const struct SaModel *model,
                             const double *row,
                             size_t len,
                             double *out_score);

/**
 * Embedding of one feature row. `out_embedding` must hold
 * `sa_model_embed_dim(model)` values.
 */
enum SaStatus sa_model_embed(const struct SaModel *model,
                             const double *row,
                             size_t len,
                             double *out_embedding);

/**
 * Encodes dataset rows into an embedding bundle. `rows`, when non-null,
 * lists row indices to include; when null, every row is encoded.
 * `source` labels where the rows came from.
 */
enum SaStatus sa_model_bundle(const struct SaModel *model,
                              const struct SaDataset *dataset,
                              const size_t *rows,
                              size_t n_rows,
                              const char *source,
                              struct SaBundle **out_bundle);

/**
 * Releases a model handle; null is ignored.
 */
void sa_model_free(struct SaModel *model);

/**
 * Writes the bundle as JSON to `path`.
 */
enum SaStatus sa_bundle_export(const struct SaBundle *bundle, const char *path);

/**
 * Loads a bundle previously written by `sa_bundle_export`, validating
 * unit norms and label shapes.
 */
enum SaStatus sa_bundle_import(const char *path, struct SaBundle **out_bundle);

/**
 * Number of embeddings in the bundle; 0 when the handle is null.
 */
size_t sa_bundle_rows(const struct SaBundle *bundle);

/**
 * Embedding dimensionality of the bundle; 0 when the handle is null.
 */
size_t sa_bundle_dim(const struct SaBundle *bundle);

/**
 * Copies one embedding out of the bundle. `out_embedding` must hold
 * `sa_bundle_dim(bundle)` values.
 */
enum SaStatus sa_bundle_embedding(const struct SaBundle *bundle,
                                  size_t index,
                                  double *out_embedding);

/**
 * Releases a bundle handle; null is ignored.
 */
void sa_bundle_free(struct SaBundle *bundle);

/**
 * Concordance index of risk scores against observed survival: the
 * fraction of comparable pairs the scores order correctly, ties counted
 * half.
 */
enum SaStatus sa_concordance_index(const double *times,
                                   const uint8_t *events,
                                   const double *scores,
                                   size_t n,
                                   double *out_value);

/**
 * Two-sample log-rank test; writes the chi-square statistic and its
 * p-value on one degree of freedom.
 */
enum SaStatus sa_logrank_test(const double *times_a,
                              const uint8_t *events_a,
                              size_t n_a,
                              const double *times_b,
                              const uint8_t *events_b,
                              size_t n_b,
                              double *out_statistic,
                              double *out_p_value);

/**
 * Fits a `k`-component mixture to the bundle's embeddings and returns a
 * JSON report `{"assignments":[...],"iterations":...,"converged":...,
 * "mean_log_likelihood":...}` through `out_json` (release with
 * `sa_string_free`).
 */
enum SaStatus sa_cluster_json(const struct SaBundle *bundle,
                              size_t k,
                              enum SaMixtureKind kind,
                              size_t max_iter,
                              double tol,
                              uint64_t seed,
                              char **out_json);

/**
 * Fits a `k`-component mixture, derives one anchor direction per
 * cluster, and projects every embedding onto every anchor. Returns JSON
 * `{"anchors":[{"label":...,"direction":[...]},...],
 * "projections":[[...],...]}` where `projections[a][i]` is the cosine
 * similarity of embedding `i` with anchor `a`, both centered on the
 * bundle's mean. Release the string with `sa_string_free`.
 */
enum SaStatus sa_cluster_anchors_json(const struct SaBundle *bundle,
                                      size_t k,
                                      enum SaMixtureKind kind,
                                      size_t max_iter,
                                      double tol,
                                      uint64_t seed,
                                      char **out_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SURVANCHOR_H */
