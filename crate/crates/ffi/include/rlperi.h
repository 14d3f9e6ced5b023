#ifndef RLPERI_H
#define RLPERI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlperiStatus {
  RLPERI_STATUS_OK = 0,
  RLPERI_STATUS_NULL_POINTER = 1,
  RLPERI_STATUS_INVALID_ARGUMENT = 2,
  RLPERI_STATUS_DOMAIN = 3,
  RLPERI_STATUS_PROTOCOL = 4,
  RLPERI_STATUS_IO = 5,
  RLPERI_STATUS_CHECKPOINT = 6,
  RLPERI_STATUS_NUMERICAL = 7,
  RLPERI_STATUS_PANIC = 8,
} RlperiStatus;

typedef enum RlperiStep {
  /**
   * Same location, next stimulus in `proposal`.
   */
  RLPERI_STEP_NEXT = 0,
  /**
   * `finished_location` is done; `proposal` starts the next one.
   */
  RLPERI_STEP_LOCATION_COMPLETE = 1,
  /**
   * All 54 locations done; `proposal` is unset.
   */
  RLPERI_STEP_SESSION_COMPLETE = 2,
} RlperiStep;

/**
 * A live test session.
 */
typedef struct RlperiSession RlperiSession;

/**
 * ZEST estimator for one location.
 */
typedef struct RlperiZest RlperiZest;

/**
 * A stimulus to present.
 */
typedef struct RlperiProposal {
  uint64_t turn;
  uint32_t location;
  uint32_t row;
  uint32_t col;
  uint8_t stimulus_db;
} RlperiProposal;

typedef struct RlperiResponse {
  enum RlperiStep step;
  struct RlperiProposal proposal;
  uint32_t finished_location;
  uint8_t estimate_db;
  uint32_t total_stimuli;
} RlperiResponse;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next `rlperi_*` call on the same thread.
 */
const char *rlperi_last_error(void);

/**
 * Library version as a static string.
 */
const char *rlperi_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void rlperi_string_free(char *s);

/**
 * `10 log10(l_max / l)`.
 *
 * # Safety
 * `db` must be a valid pointer.
 */
enum RlperiStatus rlperi_db_from_luminance(double l_max, double l, double *db);

/**
 * `l_max · 10^(-db / 10)`.
 *
 * # Safety
 * `l` must be a valid pointer.
 */
enum RlperiStatus rlperi_luminance_from_db(double l_max, double db, double *l);

/**
 * Probability that a stimulus of `stimulus_db` is seen at a location with
 * threshold `threshold_db`, under a Gaussian frequency-of-seeing curve.
 *
 * # Safety
 * `p` must be a valid pointer.
 */
enum RlperiStatus rlperi_p_seen(uint8_t threshold_db,
                                double stimulus_db,
                                double sigma_fos,
                                double *p);

/**
 * Starts a ZEST run from `prior` (`len` must be 41; it is normalized).
 *
 * # Safety
 * `prior` must point to `len` doubles and `zest` must be a valid pointer.
 */
enum RlperiStatus rlperi_zest_new(const double *prior,
                                  size_t len,
                                  double sigma_stop,
                                  double sigma_lik,
                                  uint32_t max_presentations,
                                  struct RlperiZest **zest);

/**
 * Folds one response in; `done` reports whether testing should stop.
 *
 * # Safety
 * `zest` must be a live handle and `done` a valid pointer.
 */
enum RlperiStatus rlperi_zest_update(struct RlperiZest *zest,
                                     bool seen,
                                     uint8_t presented_db,
                                     bool *done);

/**
 * Current estimate (pdf mode), which is also the next stimulus to present.
 *
 * # Safety
 * `zest` must be a live handle and `estimate` a valid pointer.
 */
enum RlperiStatus rlperi_zest_estimate(struct RlperiZest *zest, uint8_t *estimate);

/**
 * Posterior standard deviation, dB.
 *
 * # Safety
 * `zest` must be a live handle and `std` a valid pointer.
 */
enum RlperiStatus rlperi_zest_std(struct RlperiZest *zest, double *std);

/**
 * Copies the posterior into `pdf` (`len` must be 41).
 *
 * # Safety
 * `zest` must be a live handle and `pdf` must point to `len` doubles.
 */
enum RlperiStatus rlperi_zest_pdf(struct RlperiZest *zest, double *pdf, size_t len);

/**
 * # Safety
 * `zest` must be null or a live handle; it is invalid afterwards.
 */
void rlperi_zest_free(struct RlperiZest *zest);

/**
 * Opens a session. `strategy` is one of rlperi, random, raster, neighbor.
 * `checkpoint` is required for rlperi; the prior comes from `prior_csv`
 * when given, else from the checkpoint. Either may be null.
 *
 * # Safety
 * Strings must be null or NUL-terminated; `session` and `first` must be
 * valid pointers.
 */
enum RlperiStatus rlperi_session_new(const char *strategy,
                                     double sigma_stop,
                                     uint64_t seed,
                                     const char *checkpoint,
                                     const char *prior_csv,
                                     struct RlperiSession **session,
                                     struct RlperiProposal *first);

/**
 * Answers the pending stimulus.
 *
 * # Safety
 * `session` must be a live handle and `response` a valid pointer.
 */
enum RlperiStatus rlperi_session_respond(struct RlperiSession *session,
                                         bool seen,
                                         struct RlperiResponse *response);

/**
 * Writes the 54 per-location estimates, -1 where untested.
 *
 * # Safety
 * `session` must be a live handle and `values` must point to `len` int16s.
 */
enum RlperiStatus rlperi_session_reconstruction(struct RlperiSession *session,
                                                int16_t *values,
                                                size_t len);

/**
 * The full result (reconstruction, counts, transcript) as JSON. Free the
 * string with [`rlperi_string_free`].
 *
 * # Safety
 * `session` must be a live handle and `json` a valid pointer.
 */
enum RlperiStatus rlperi_session_result_json(struct RlperiSession *session, char **json);

/**
 * # Safety
 * `session` must be null or a live handle; it is invalid afterwards.
 */
void rlperi_session_free(struct RlperiSession *session);

/**
 * Null-safe helper for C callers that want an empty handle slot.
 */
struct RlperiSession *rlperi_null_session(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RLPERI_H */
