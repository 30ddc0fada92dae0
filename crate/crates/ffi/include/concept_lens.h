#ifndef CONCEPT_LENS_H
#define CONCEPT_LENS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ClFormat {
  CL_FORMAT_PLANT_UML = 0,
  CL_FORMAT_MERMAID = 1,
  CL_FORMAT_JSON = 2,
} ClFormat;

typedef enum ClLevel {
  CL_LEVEL_INSTANCE = 0,
  CL_LEVEL_CLASS = 1,
} ClLevel;

typedef enum ClMode {
  CL_MODE_MP = 0,
  CL_MODE_MP_D = 1,
} ClMode;

typedef enum ClStatus {
  CL_STATUS_OK = 0,
  CL_STATUS_NULL_ARG = 1,
  CL_STATUS_INVALID_UTF8 = 2,
  CL_STATUS_IO = 3,
  CL_STATUS_PARSE = 4,
  CL_STATUS_INTEGRITY = 5,
  CL_STATUS_INVALID_ARGUMENT = 6,
  CL_STATUS_EMPTY_GROUND_TRUTH = 7,
  CL_STATUS_INTERNAL = 8,
} ClStatus;

// A code model with its detected patterns.
typedef struct ClModel ClModel;

typedef struct ClTrace ClTrace;

typedef struct ClSummarizeOptions {
  enum ClMode mode;
  // Objects ranked strictly above this importance are shown.
  double threshold;
  enum ClLevel level;
  enum ClFormat format;
  bool include_external;
  bool returns;
  double long_lived;
  double short_lived;
} ClSummarizeOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until
// the next call into the library on the same thread.
const char *cl_last_error_message(void);

// Library version as a static string.
const char *cl_version(void);

struct ClSummarizeOptions cl_summarize_options_default(void);

// # Safety
// `path` must be a nul-terminated string and `out` a valid pointer.
enum ClStatus cl_model_load(const char *path, struct ClModel **out);

// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer.
enum ClStatus cl_model_from_json(const char *json, struct ClModel **out);

// # Safety
// `model` must be null or a handle from this library, not yet freed.
void cl_model_free(struct ClModel *model);

// # Safety
// `path` must be a nul-terminated string and `out` a valid pointer.
enum ClStatus cl_trace_load(const char *path, struct ClTrace **out);

// # Safety
// `trace_text` must be a nul-terminated string and `out` a valid pointer.
enum ClStatus cl_trace_from_text(const char *trace_text, struct ClTrace **out);

// # Safety
// `trace` must be null or a handle from this library, not yet freed.
void cl_trace_free(struct ClTrace *trace);

// Number of events in the trace; zero for a null handle.
//
// # Safety
// `trace` must be null or a live handle.
size_t cl_trace_event_count(const struct ClTrace *trace);

// Detected patterns as JSON.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum ClStatus cl_detect_patterns_json(const struct ClModel *model, char **out);

// Object groups as JSON.
//
// # Safety
// Handles must be live and `out` a valid pointer.
enum ClStatus cl_group_json(const struct ClModel *model,
                            const struct ClTrace *trace,
                            enum ClMode grouping_mode,
                            char **out);

// Object profiles as CSV.
//
// # Safety
// `trace` must be a live handle and `out` a valid pointer.
enum ClStatus cl_rank_csv(const struct ClTrace *trace,
                          double long_lived,
                          double short_lived,
                          char **out);

// Summarized diagram in the requested format. A null `options` means
// [`cl_summarize_options_default`].
//
// # Safety
// Handles must be live, `options` null or valid, `out` a valid pointer.
enum ClStatus cl_summarize(const struct ClModel *model,
                           const struct ClTrace *trace,
                           const struct ClSummarizeOptions *options,
                           char **out);

// F-measure report (JSON) of the class-level groups shown at
// `options.threshold` against a ground truth given as JSON text.
//
// # Safety
// Handles must be live, `ground_truth_json` nul-terminated, `options`
// null or valid, `out` a valid pointer.
enum ClStatus cl_evaluate(const struct ClModel *model,
                          const struct ClTrace *trace,
                          const struct ClSummarizeOptions *options,
                          const char *ground_truth_json,
                          char **out);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void cl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONCEPT_LENS_H */
