#ifndef MSLED_H
#define MSLED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Maximum number of scales an `MsledConfig` can carry.
 */
#define MSLED_MAX_SCALES 8

typedef enum MsledStatus {
  MSLED_STATUS_OK = 0,
  MSLED_STATUS_NULL_POINTER = 1,
  MSLED_STATUS_INVALID_ARGUMENT = 2,
  MSLED_STATUS_IO = 3,
  MSLED_STATUS_DECODE = 4,
  MSLED_STATUS_DEGENERATE = 5,
  MSLED_STATUS_NUMERICAL = 6,
  MSLED_STATUS_DATASET = 7,
  MSLED_STATUS_K_OUT_OF_RANGE = 8,
  MSLED_STATUS_UNKNOWN_ID = 9,
  MSLED_STATUS_FORMAT = 10,
  MSLED_STATUS_VERSION_MISMATCH = 11,
  MSLED_STATUS_TRUNCATED = 12,
  MSLED_STATUS_CHECKSUM_MISMATCH = 13,
  MSLED_STATUS_BUFFER_TOO_SMALL = 14,
  MSLED_STATUS_PANIC = 15,
} MsledStatus;

/**
 * Multiscale covariance descriptor of one image.
 */
typedef struct MsledDescriptor MsledDescriptor;

/**
 * Loaded descriptor index.
 */
typedef struct MsledIndex MsledIndex;

/**
 * Pipeline parameters. Obtain defaults from `msled_config_default`.
 */
typedef struct MsledConfig {
  uint32_t window;
  uint32_t block_size;
  double overlap;
  uint32_t n_scales;
  double scales[MSLED_MAX_SCALES];
  double epsilon_scale;
  /**
   * Nonzero to require extrema to strictly dominate their window.
   */
  uint8_t strict_extrema;
} MsledConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *msled_version(void);

/**
 * Message describing the last failure on the calling thread, or an empty
 * string. Valid until the next library call on this thread.
 */
const char *msled_last_error(void);

/**
 * The default pipeline parameters.
 */
struct MsledConfig msled_config_default(void);

/**
 * Computes the descriptor of a PPM or PNG image. `config` may be null for
 * the defaults.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `config` null or valid and
 * `out_descriptor` writable.
 */
enum MsledStatus msled_descriptor_from_image(const char *path,
                                             const struct MsledConfig *config,
                                             struct MsledDescriptor **out_descriptor);

/**
 * Multiscale Riemannian distance between two descriptors.
 *
 * # Safety
 * Handles must come from this library; `out_distance` must be writable.
 */
enum MsledStatus msled_descriptor_distance(const struct MsledDescriptor *a,
                                           const struct MsledDescriptor *b,
                                           double *out_distance);

/**
 * # Safety
 * `descriptor` must be null or a handle not freed before.
 */
void msled_descriptor_free(struct MsledDescriptor *descriptor);

/**
 * Loads an index file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_index` writable.
 */
enum MsledStatus msled_index_load(const char *path, struct MsledIndex **out_index);

/**
 * Scans `dataset_dir` and builds an index. `labeling` is 0 for the parent
 * directory name and 1 for the file stem; `config` may be null.
 *
 * # Safety
 * `dataset_dir` must be a NUL-terminated string, `config` null or valid,
 * `out_index` writable.
 */
enum MsledStatus msled_index_build(const char *dataset_dir,
                                   uint32_t labeling,
                                   const struct MsledConfig *config,
                                   struct MsledIndex **out_index);

/**
 * Writes an index file.
 *
 * # Safety
 * `index` must be a live handle and `path` a NUL-terminated string.
 */
enum MsledStatus msled_index_save(const struct MsledIndex *index, const char *path);

/**
 * Number of entries, or 0 for a null handle.
 *
 * # Safety
 * `index` must be null or a live handle.
 */
uintptr_t msled_index_len(const struct MsledIndex *index);

/**
 * The `k` entries closest to `probe`, ascending by distance with ties broken
 * by id. `out_ids` and `out_distances` must each hold `k` values; either may
 * be null when not wanted.
 *
 * # Safety
 * Handles must be live; non-null buffers must hold `k` elements.
 */
enum MsledStatus msled_index_query(const struct MsledIndex *index,
                                   const struct MsledDescriptor *probe,
                                   uintptr_t k,
                                   uint64_t *out_ids,
                                   double *out_distances);

/**
 * Average retrieval rate of the index at `k`.
 *
 * # Safety
 * `index` must be live and `out_arr` writable.
 */
enum MsledStatus msled_index_evaluate_arr(const struct MsledIndex *index,
                                          uintptr_t k,
                                          double *out_arr);

/**
 * Copies the class label of entry `id` into `buf` as a NUL-terminated
 * string. `out_len` (optional) receives the label length without the NUL;
 * `MSLED_STATUS_BUFFER_TOO_SMALL` is returned when `buf_len` is not enough.
 *
 * # Safety
 * `index` must be live and `buf` must hold `buf_len` bytes.
 */
enum MsledStatus msled_index_label(const struct MsledIndex *index,
                                   uint64_t id,
                                   char *buf,
                                   uintptr_t buf_len,
                                   uintptr_t *out_len);

/**
 * # Safety
 * `index` must be null or a handle not freed before.
 */
void msled_index_free(struct MsledIndex *index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSLED_H */
