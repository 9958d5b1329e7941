#ifndef PAGESENTINEL_H
#define PAGESENTINEL_H

/* Generated by cbindgen from pagesentinel-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this API.
 */
typedef enum SentinelStatus {
  /**
   * The call succeeded and all out-parameters are set.
   */
  SENTINEL_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  SENTINEL_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SENTINEL_STATUS_INVALID_UTF8 = 2,
  /**
   * The configuration document was rejected.
   */
  SENTINEL_STATUS_INVALID_CONFIG = 3,
  /**
   * The library failed internally; see sentinel_last_error_message().
   */
  SENTINEL_STATUS_INTERNAL = 4,
  /**
   * A panic was caught at the boundary; the handle is still usable.
   */
  SENTINEL_STATUS_PANIC = 5,
} SentinelStatus;

/**
 * A configured scanning pipeline. Opaque; create with one of the
 * `sentinel_scanner_new_*` constructors, release with
 * [`sentinel_scanner_free`]. A scanner is immutable after construction
 * and safe to share between threads.
 */
typedef struct SentinelScanner SentinelScanner;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a scanner over the built-in deterministic mock backend with
 * default rules: fully offline, reproducible verdicts. Writes the new
 * handle to `out` and returns `SENTINEL_STATUS_OK`.
 *
 * # Safety
 * `out` must be a valid pointer to a `SentinelScanner*`.
 */
enum SentinelStatus sentinel_scanner_new_mock(struct SentinelScanner **out);

/**
 * Creates a scanner from a JSON configuration document — the same schema
 * the command-line tool accepts via `--config`. An empty document (`{}`)
 * is the mock default; `{"backend": {"kind": "http", ...}}` configures a
 * live endpoint. Template override paths are resolved against the current
 * working directory.
 *
 * # Safety
 * `config_json` must be a valid NUL-terminated string and `out` a valid
 * pointer to a `SentinelScanner*`.
 */
enum SentinelStatus sentinel_scanner_new_with_config(const char *config_json,
                                                     struct SentinelScanner **out);

/**
 * Releases a scanner. NULL is a no-op. The handle must not be used
 * afterwards.
 *
 * # Safety
 * `scanner` must be NULL or a pointer returned by a constructor of this
 * library that has not been freed yet.
 */
void sentinel_scanner_free(struct SentinelScanner *scanner);

/**
 * Scans one HTML document and writes the page report to
 * `report_json_out` as a newly allocated JSON string: the page verdict,
 * per-segment check results, analysis failures, and any extraction
 * failures. Release the string with [`sentinel_string_free`].
 *
 * # Safety
 * `scanner` must be a live handle from this library, `html` a valid
 * NUL-terminated string, and `report_json_out` valid for writing one
 * pointer.
 */
enum SentinelStatus sentinel_scan_html(const struct SentinelScanner *scanner,
                                       const char *html,
                                       char **report_json_out);

/**
 * Scans one HTML document and writes only the page-level verdict:
 * 1 when the page is judged malicious, 0 when benign.
 *
 * # Safety
 * `scanner` must be a live handle from this library, `html` a valid
 * NUL-terminated string, and `malicious_out` valid for writing one int.
 */
enum SentinelStatus sentinel_scan_is_malicious(const struct SentinelScanner *scanner,
                                               const char *html,
                                               int *malicious_out);

/**
 * Releases a string allocated by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must be NULL or a string pointer this library returned that has
 * not been freed yet.
 */
void sentinel_string_free(char *s);

/**
 * Returns the reason for the most recent failure on this thread, or NULL
 * when no call has failed yet. The pointer stays valid until the next
 * failing call on the same thread; do not free it.
 */
const char *sentinel_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PAGESENTINEL_H */
