#ifndef TRACKLET3D_H
#define TRACKLET3D_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum T3dStatus {
  T3D_STATUS_OK = 0,
  T3D_STATUS_NULL_POINTER = 1,
  T3D_STATUS_INVALID_UTF8 = 2,
  T3D_STATUS_INVALID_INPUT = 3,
  T3D_STATUS_OUT_OF_ORDER_FRAME = 4,
  T3D_STATUS_PARSE = 5,
  T3D_STATUS_INVARIANT = 6,
  T3D_STATUS_PANIC = 7,
} T3dStatus;

/**
 * Tracking state of one video.
 */
typedef struct T3dTracker T3dTracker;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a tracker. `config_json` holds a configuration object and may be
 * null for defaults. On success `*out` owns the new handle.
 *
 * # Safety
 * `config_json` must be null or a NUL-terminated string; `out` must be a
 * valid pointer.
 */
enum T3dStatus t3d_tracker_new(const char *config_json, struct T3dTracker **out);

/**
 * Releases a tracker. Null is ignored.
 *
 * # Safety
 * `tracker` must come from `t3d_tracker_new` and not be used afterwards.
 */
void t3d_tracker_free(struct T3dTracker *tracker);

/**
 * Marks `frame` as the first frame of a new shot.
 *
 * # Safety
 * `tracker` must be a live handle.
 */
enum T3dStatus t3d_tracker_add_shot_boundary(struct T3dTracker *tracker, uint64_t frame);

/**
 * Processes one frame. `detections_json` is a JSON array of detection
 * records, all with `frame` equal to `frame`. On success `*out_json` holds
 * a JSON array of track output records, one per detection, to be released
 * with `t3d_string_free`.
 *
 * # Safety
 * `tracker` must be a live handle, `detections_json` a NUL-terminated
 * string and `out_json` a valid pointer.
 */
enum T3dStatus t3d_tracker_step(struct T3dTracker *tracker,
                                uint64_t frame,
                                const char *detections_json,
                                char **out_json);

/**
 * Number of live tracks.
 *
 * # Safety
 * `tracker` must be a live handle and `out` a valid pointer.
 */
enum T3dStatus t3d_tracker_num_tracks(const struct T3dTracker *tracker, size_t *out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void t3d_string_free(char *s);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *t3d_last_error_message(void);

/**
 * Static name of a status code.
 */
const char *t3d_status_name(enum T3dStatus status);

/**
 * Nearness `-ln z` of a positive depth.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum T3dStatus t3d_to_nearness(double z, double *out);

/**
 * Thresholded assignment on a row-major `rows x cols` cost matrix. Writes
 * the matched column of each row to `row_to_col`, or -1 when the row stays
 * unmatched.
 *
 * # Safety
 * `costs` must point to `rows * cols` doubles and `row_to_col` to `rows`
 * writable integers; either may be null when the product is zero.
 */
enum T3dStatus t3d_solve_assignment(const double *costs,
                                    size_t rows,
                                    size_t cols,
                                    double beta_th,
                                    int64_t *row_to_col);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRACKLET3D_H */
