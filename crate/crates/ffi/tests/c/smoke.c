#include <stdio.h>
#include <string.h>

#include "concept_lens.h"

static int fail(const char *what, ClStatus status) {
  const char *msg = cl_last_error_message();
  fprintf(stderr, "%s: status %d: %s\n", what, (int)status, msg ? msg : "(none)");
  return 1;
}

int main(int argc, char **argv) {
  if (argc != 3) {
    fprintf(stderr, "usage: smoke MODEL TRACE\n");
    return 2;
  }
  ClModel *model = NULL;
  ClTrace *trace = NULL;
  char *text = NULL;
  ClStatus st = cl_model_load(argv[1], &model);
  if (st != CL_STATUS_OK) return fail("model", st);
  st = cl_trace_load(argv[2], &trace);
  if (st != CL_STATUS_OK) return fail("trace", st);

  ClSummarizeOptions options = cl_summarize_options_default();
  options.mode = CL_MODE_MP;
  st = cl_summarize(model, trace, &options, &text);
  if (st != CL_STATUS_OK) return fail("summarize", st);
  fputs(text, stdout);
  cl_string_free(text);

  st = cl_trace_load("/nonexistent/trace.txt", &trace);
  if (st != CL_STATUS_IO || trace != NULL) return fail("expected io error", st);

  cl_model_free(model);
  return 0;
}
