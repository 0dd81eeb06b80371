#ifndef SPATIAL_EDR_H
#define SPATIAL_EDR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SedrStatus {
  SEDR_STATUS_OK = 0,
  // Null pointer, bad length or invalid UTF-8.
  SEDR_STATUS_INVALID_ARGUMENT = 1,
  // Inputs rejected by the library (exit code 2 of the CLI).
  SEDR_STATUS_VALIDATION = 2,
  // Numerical failure (exit code 3 of the CLI).
  SEDR_STATUS_NUMERICAL = 3,
  SEDR_STATUS_IO = 4,
  // A Rust panic was caught at the boundary.
  SEDR_STATUS_PANIC = 5,
} SedrStatus;

typedef struct SedrDataset SedrDataset;

typedef struct SedrEdrModel SedrEdrModel;

typedef struct SedrField SedrField;

typedef struct SedrPredictor SedrPredictor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next `sedr_*` call on the same thread.
const char *sedr_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sedr_version(void);

// Simulates a field from the `field.*` keys of `config_text`.
enum SedrStatus sedr_field_simulate(const char *config_text, uint64_t seed, struct SedrField **out);

// Field over the box with lower corner `origin` and sides `dims`; `values`
// holds one value per site in lexicographic order.
enum SedrStatus sedr_field_new(const int64_t *origin,
                               const size_t *dims,
                               size_t ndim,
                               const double *values,
                               size_t len,
                               struct SedrField **out);

size_t sedr_field_ndim(const struct SedrField *field);

// Number of sites.
size_t sedr_field_len(const struct SedrField *field);

// Copies the values in lexicographic site order.
enum SedrStatus sedr_field_values(const struct SedrField *field, double *buf, size_t len);

void sedr_field_free(struct SedrField *field);

// `n` samples; `xs` is row-major `n x dim`.
enum SedrStatus sedr_dataset_new(size_t dim,
                                 const double *xs,
                                 const double *ys,
                                 size_t n,
                                 struct SedrDataset **out);

void sedr_dataset_free(struct SedrDataset *data);

// Centers the covariates and estimates the EDR directions with the
// `kernel.*`, `schedule.*`, `floor.*` and `dimension.*` keys.
enum SedrStatus sedr_edr_fit(const struct SedrDataset *data,
                             const char *config_text,
                             struct SedrEdrModel **out);

// Selected number of directions `D`.
size_t sedr_edr_dimension(const struct SedrEdrModel *model);

// Covariate dimension `d`.
size_t sedr_edr_dim(const struct SedrEdrModel *model);

// Copies all `d` eigenvalues in decreasing order.
enum SedrStatus sedr_edr_eigenvalues(const struct SedrEdrModel *model, double *buf, size_t len);

// Copies the `D x d` directions, row-major.
enum SedrStatus sedr_edr_directions(const struct SedrEdrModel *model, double *buf, size_t len);

void sedr_edr_free(struct SedrEdrModel *model);

// Distance between the row spans of two row-major matrices with `cols`
// columns.
enum SedrStatus sedr_subspace_distance(const double *a,
                                       size_t rows_a,
                                       const double *b,
                                       size_t rows_b,
                                       size_t cols,
                                       double *out);

// Runs the neighbor-count scan with the `scan.*` keys over the whole field.
enum SedrStatus sedr_neighbor_scan(const struct SedrField *field,
                                   const char *config_text,
                                   size_t *out_d,
                                   bool *out_cap_reached);

// Fits the dimension-reduction predictor on the whole field. `d = 0` runs
// the neighbor scan first.
enum SedrStatus sedr_predictor_fit(const struct SedrField *field,
                                   size_t d,
                                   const char *config_text,
                                   struct SedrPredictor **out);

// Number of neighbors the predictor uses.
size_t sedr_predictor_neighbors(const struct SedrPredictor *pred);

// Number of EDR directions the predictor uses.
size_t sedr_predictor_dimension(const struct SedrPredictor *pred);

// Predicts at `site` (length `ndim`) from the values of `field`, whose
// region is taken as the observed region.
enum SedrStatus sedr_predictor_predict(const struct SedrPredictor *pred,
                                       const struct SedrField *field,
                                       const int64_t *site,
                                       size_t ndim,
                                       double *out);

void sedr_predictor_free(struct SedrPredictor *pred);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPATIAL_EDR_H */
