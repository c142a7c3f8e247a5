#ifndef PAS_FFI_H
#define PAS_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Capacity of [`PasToken::anchor_id`], including the terminating NUL.
#define PAS_ANCHOR_ID_CAP 32

#define PAS_MODE_BASELINE 0

#define PAS_MODE_PAS 1

typedef enum PasStatus {
  PAS_STATUS_OK = 0,
  PAS_STATUS_NULL_POINTER = 1,
  PAS_STATUS_INVALID_ARGUMENT = 2,
  PAS_STATUS_IO = 3,
  PAS_STATUS_NOT_FOUND = 4,
  PAS_STATUS_RUNTIME = 5,
  PAS_STATUS_PANIC = 6,
} PasStatus;

// A loaded dataset with default distance bins, the lexical embedder and
// default retrieval settings.
typedef struct PasDataset PasDataset;

// A released location token. `direction` is 0 = N, 1 = NE, ... 7 = NW.
typedef struct PasToken {
  char anchor_id[PAS_ANCHOR_ID_CAP];
  uint8_t direction;
  uint32_t dist_bin;
  double epsilon;
  double scale_m;
} PasToken;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next call into the library on the same thread.
const char *pas_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *pas_version(void);

// Loads `anchors.jsonl`, `chunks.jsonl` and `queries.jsonl` from `dir`.
//
// # Safety
// `dir` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
enum PasStatus pas_dataset_load(const char *dir, struct PasDataset **out);

// Releases a handle from [`pas_dataset_load`]. NULL is ignored.
//
// # Safety
// `ds` must be NULL or a handle that has not been freed yet.
void pas_dataset_free(struct PasDataset *ds);

// # Safety
// `ds` must be a live handle; output pointers must be NULL or writable.
enum PasStatus pas_dataset_counts(const struct PasDataset *ds,
                                  size_t *anchors,
                                  size_t *chunks,
                                  size_t *queries);

// Great-circle distance in meters.
//
// # Safety
// `out` must be NULL or writable.
enum PasStatus pas_haversine_m(double lat1, double lon1, double lat2, double lon2, double *out);

// Initial bearing in degrees clockwise from north. Coincident points give 0
// with `*degenerate` set.
//
// # Safety
// `out` and `degenerate` must be NULL or writable.
enum PasStatus pas_bearing_deg(double lat1,
                               double lon1,
                               double lat2,
                               double lon2,
                               double *out,
                               bool *degenerate);

// Privatizes `(lat, lon)` against the dataset's anchors. Identical seeds
// give identical tokens.
//
// # Safety
// `ds` must be a live handle; `out` must be NULL or writable.
enum PasStatus pas_make_token(const struct PasDataset *ds,
                              double lat,
                              double lon,
                              double epsilon,
                              double scale_m,
                              uint64_t seed,
                              struct PasToken *out);

// Runs retrieval for a dataset query and writes the ranked result as JSON.
// `mode` is [`PAS_MODE_BASELINE`] or [`PAS_MODE_PAS`]; `epsilon`, `scale_m`
// and `seed` are ignored for the baseline. Matches `pas query` for the same
// seed. Free `*out_json` with [`pas_string_free`].
//
// # Safety
// `ds` must be a live handle, `query_id` a NUL-terminated string and
// `out_json` NULL or writable.
enum PasStatus pas_retrieve_json(const struct PasDataset *ds,
                                 const char *query_id,
                                 int32_t mode,
                                 double epsilon,
                                 double scale_m,
                                 uint64_t seed,
                                 char **out_json);

// Localization error of a centroid observer with `samples` draws from the
// token's region.
//
// # Safety
// `ds` must be a live handle, `token` readable and `out` NULL or writable.
enum PasStatus pas_ale(const struct PasDataset *ds,
                       double lat,
                       double lon,
                       const struct PasToken *token,
                       uint32_t samples,
                       uint64_t seed,
                       double *out);

// Releases a string returned by the library. NULL is ignored.
//
// # Safety
// `s` must be NULL or a string from this library that has not been freed.
void pas_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PAS_FFI_H */
