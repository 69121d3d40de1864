/* C interface to the nerdiag bucketed NER evaluation library. */

#ifndef NERDIAG_H
#define NERDIAG_H

/* Generated by cbindgen from nerdiag-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of an interface call.
 */
typedef enum NerdiagStatus {
  /**
   * The call succeeded.
   */
  NERDIAG_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  NERDIAG_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  NERDIAG_STATUS_INVALID_UTF8 = 2,
  /**
   * The configuration JSON was malformed or inconsistent.
   */
  NERDIAG_STATUS_INVALID_CONFIG = 3,
  /**
   * The analysis itself failed (unreadable files, bad corpus, ...).
   */
  NERDIAG_STATUS_ANALYSIS_FAILED = 4,
} NerdiagStatus;

/**
 * Opaque handle to a finished analysis.
 */
typedef struct NerdiagReport NerdiagReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Runs an analysis described by a JSON configuration string.
 *
 * On success writes a report handle to `out_report` and returns
 * [`NerdiagStatus::Ok`]. On failure returns the matching status and leaves
 * `out_report` untouched; [`nerdiag_last_error`] describes the problem.
 *
 * # Safety
 *
 * `config_json` must be a valid NUL-terminated C string and `out_report` a
 * valid pointer to writable memory.
 */
enum NerdiagStatus nerdiag_analyze(const char *config_json, struct NerdiagReport **out_report);

/**
 * Renders the report as JSON. Returns NULL on failure; free the result
 * with [`nerdiag_string_free`].
 *
 * # Safety
 *
 * `report` must be a handle obtained from [`nerdiag_analyze`] that has not
 * been freed.
 */
char *nerdiag_report_json(const struct NerdiagReport *report);

/**
 * Renders the report as markdown. Returns NULL on failure; free the
 * result with [`nerdiag_string_free`].
 *
 * # Safety
 *
 * `report` must be a handle obtained from [`nerdiag_analyze`] that has not
 * been freed.
 */
char *nerdiag_report_markdown(const struct NerdiagReport *report);

/**
 * Number of warnings the analysis produced (reduced bucket counts,
 * systems without predictions, ...).
 *
 * # Safety
 *
 * `report` must be a handle obtained from [`nerdiag_analyze`] that has not
 * been freed, or NULL (which yields 0).
 */
size_t nerdiag_report_warning_count(const struct NerdiagReport *report);

/**
 * One warning message by index, or NULL when the index is out of range.
 * Free the result with [`nerdiag_string_free`].
 *
 * # Safety
 *
 * `report` must be a handle obtained from [`nerdiag_analyze`] that has not
 * been freed, or NULL.
 */
char *nerdiag_report_warning(const struct NerdiagReport *report, size_t index);

/**
 * Releases a report handle. NULL is ignored.
 *
 * # Safety
 *
 * `report` must be a handle obtained from [`nerdiag_analyze`], freed at
 * most once.
 */
void nerdiag_report_free(struct NerdiagReport *report);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 *
 * `s` must be a string returned by this library, freed at most once.
 */
void nerdiag_string_free(char *s);

/**
 * The last error message on this thread, or NULL when the previous call
 * succeeded. Free the result with [`nerdiag_string_free`].
 */
char *nerdiag_last_error(void);

/**
 * The library version as a static string. Do not free.
 */
const char *nerdiag_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* NERDIAG_H */
