#ifndef LAGEN_H
#define LAGEN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LAGEN_API __declspec(dllexport)
#else
#define LAGEN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lagen_status {
  LAGEN_OK = 0,
  LAGEN_ERR_ARGUMENT = 1,
  LAGEN_ERR_IO = 2,
  LAGEN_ERR_SYNTAX = 3,
  LAGEN_ERR_UNKNOWN_PROPERTY = 4,
  LAGEN_ERR_UNDECLARED = 5,
  LAGEN_ERR_DIMENSION = 6,
  LAGEN_ERR_INCONSISTENT = 7,
  LAGEN_ERR_UNSOLVABLE = 8,
  LAGEN_ERR_BUDGET = 9,
  LAGEN_ERR_RANGE = 10,
  LAGEN_ERR_INTERNAL = 11
} lagen_status;

typedef enum lagen_emit_format {
  LAGEN_EMIT_TEXT = 0,
  LAGEN_EMIT_JSON = 1,
  LAGEN_EMIT_PSEUDOCODE = 2
} lagen_emit_format;

typedef enum lagen_verify_status {
  LAGEN_VERIFY_PASS = 0,
  LAGEN_VERIFY_FAIL = 1,
  LAGEN_VERIFY_SKIP = 2
} lagen_verify_status;

typedef struct lagen_problem lagen_problem;
typedef struct lagen_graph lagen_graph;
typedef struct lagen_program lagen_program;
typedef struct lagen_report lagen_report;

typedef struct lagen_options {
  double time_limit; /* seconds */
  int merging;
  int pruning;
  uint64_t max_iterations; /* 0: unlimited */
} lagen_options;

typedef struct lagen_parse_location {
  int line;
  int column;
} lagen_parse_location;

LAGEN_API const char* lagen_status_string(lagen_status s);
/* Message of the last failed call on this thread; never NULL. */
LAGEN_API const char* lagen_last_error(void);
/* Position of the last parse error on this thread, {0, 0} if none. */
LAGEN_API lagen_parse_location lagen_last_parse_location(void);
LAGEN_API void lagen_string_free(char* s);

LAGEN_API lagen_status lagen_problem_parse(const char* text, lagen_problem** out);
LAGEN_API lagen_status lagen_problem_load(const char* path, lagen_problem** out);
LAGEN_API lagen_status lagen_problem_random(uint64_t seed, long max_dim, lagen_problem** out);
/* Sizes times factor, at least min_dim. */
LAGEN_API lagen_status lagen_problem_rescale(const lagen_problem* p, double factor, long min_dim,
                                             lagen_problem** out);
LAGEN_API lagen_status lagen_problem_print(const lagen_problem* p, char** text);
LAGEN_API size_t lagen_problem_assignment_count(const lagen_problem* p);
LAGEN_API void lagen_problem_free(lagen_problem* p);

LAGEN_API void lagen_options_default(lagen_options* o);
/* LAGEN_ERR_BUDGET if the budget ran out before any solution,
   LAGEN_ERR_UNSOLVABLE if the search space holds none. */
LAGEN_API lagen_status lagen_generate(const lagen_problem* p, const lagen_options* o,
                                      lagen_graph** out);
LAGEN_API size_t lagen_graph_node_count(const lagen_graph* g);
LAGEN_API size_t lagen_graph_edge_count(const lagen_graph* g);
LAGEN_API double lagen_graph_best_cost(const lagen_graph* g);
LAGEN_API double lagen_graph_first_solution_seconds(const lagen_graph* g);
LAGEN_API lagen_status lagen_graph_dot(const lagen_graph* g, char** text);
/* Computes up to k best programs; *found receives how many exist. */
LAGEN_API lagen_status lagen_graph_best(lagen_graph* g, size_t k, size_t* found);
LAGEN_API lagen_status lagen_graph_program(const lagen_graph* g, size_t rank, lagen_program** out);
LAGEN_API lagen_status lagen_graph_report(const lagen_graph* g, size_t rank, char** text);
LAGEN_API void lagen_graph_free(lagen_graph* g);

LAGEN_API double lagen_program_cost(const lagen_program* p);
LAGEN_API size_t lagen_program_call_count(const lagen_program* p);
LAGEN_API lagen_status lagen_program_emit(const lagen_program* p, lagen_emit_format f, char** text);
LAGEN_API void lagen_program_free(lagen_program* p);

LAGEN_API lagen_status lagen_verify(const lagen_program* prog, const lagen_problem* p, uint64_t seed,
                                    double tol, lagen_report** out);
LAGEN_API lagen_verify_status lagen_report_status(const lagen_report* r);
LAGEN_API double lagen_report_error(const lagen_report* r);
LAGEN_API lagen_status lagen_report_text(const lagen_report* r, int json, char** text);
LAGEN_API void lagen_report_free(lagen_report* r);

LAGEN_API lagen_status lagen_kernel_table(char** text);

#ifdef __cplusplus
}
#endif

#endif
