#include "lagen/lagen.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>

#include "lagen/codegen.hpp"
#include "lagen/dsl.hpp"
#include "lagen/search.hpp"
#include "lagen/verify.hpp"

struct lagen_problem {
  lagen::ProblemSpec spec;
};

struct lagen_graph {
  lagen::DerivationGraph graph;
  std::vector<lagen::Path> paths;
};

struct lagen_program {
  lagen::Lowered lowered;
};

struct lagen_report {
  lagen::VerificationReport report;
};

namespace {

thread_local std::string last_error;
thread_local lagen_parse_location last_location{0, 0};

lagen_status fail(lagen_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

// Maps the core's exceptions onto status codes.
template <class F>
lagen_status guarded(F&& f) {
  last_error.clear();
  last_location = {0, 0};
  try {
    return f();
  } catch (const lagen::ParseError& e) {
    last_location = {e.line, e.column};
    lagen_status s = LAGEN_ERR_SYNTAX;
    if (dynamic_cast<const lagen::UnknownPropertyError*>(&e)) s = LAGEN_ERR_UNKNOWN_PROPERTY;
    if (dynamic_cast<const lagen::UndeclaredNameError*>(&e)) s = LAGEN_ERR_UNDECLARED;
    if (dynamic_cast<const lagen::DimensionError*>(&e)) s = LAGEN_ERR_DIMENSION;
    if (dynamic_cast<const lagen::InconsistentPropertyError*>(&e)) s = LAGEN_ERR_INCONSISTENT;
    return fail(s, e.what());
  } catch (const lagen::UnsolvableProblem& e) {
    return fail(LAGEN_ERR_UNSOLVABLE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(LAGEN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LAGEN_ERR_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* lagen_status_string(lagen_status s) {
  switch (s) {
    case LAGEN_OK: return "ok";
    case LAGEN_ERR_ARGUMENT: return "invalid argument";
    case LAGEN_ERR_IO: return "i/o error";
    case LAGEN_ERR_SYNTAX: return "syntax error";
    case LAGEN_ERR_UNKNOWN_PROPERTY: return "unknown property";
    case LAGEN_ERR_UNDECLARED: return "undeclared name";
    case LAGEN_ERR_DIMENSION: return "dimension mismatch";
    case LAGEN_ERR_INCONSISTENT: return "inconsistent properties";
    case LAGEN_ERR_UNSOLVABLE: return "unsolvable problem";
    case LAGEN_ERR_BUDGET: return "budget exhausted without a solution";
    case LAGEN_ERR_RANGE: return "index out of range";
    case LAGEN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* lagen_last_error(void) { return last_error.c_str(); }

lagen_parse_location lagen_last_parse_location(void) { return last_location; }

void lagen_string_free(char* s) { std::free(s); }

lagen_status lagen_problem_parse(const char* text, lagen_problem** out) {
  if (!text || !out) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new lagen_problem{lagen::parse_problem(text)};
    return LAGEN_OK;
  });
}

lagen_status lagen_problem_load(const char* path, lagen_problem** out) {
  if (!path || !out) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  std::ifstream in(path);
  if (!in) return fail(LAGEN_ERR_IO, std::string("cannot open ") + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return lagen_problem_parse(ss.str().c_str(), out);
}

lagen_status lagen_problem_random(uint64_t seed, long max_dim, lagen_problem** out) {
  if (!out || max_dim < 1) return fail(LAGEN_ERR_ARGUMENT, "bad argument");
  return guarded([&] {
    lagen::RandomProblemConfig c;
    c.max_dim = max_dim;
    c.min_dim = std::min(c.min_dim, max_dim);
    c.step = std::min(c.step, max_dim);
    *out = new lagen_problem{lagen::random_problem(c, seed)};
    return LAGEN_OK;
  });
}

lagen_status lagen_problem_rescale(const lagen_problem* p, double factor, long min_dim,
                                   lagen_problem** out) {
  if (!p || !out || !(factor > 0) || min_dim < 1) return fail(LAGEN_ERR_ARGUMENT, "bad argument");
  return guarded([&] {
    *out = new lagen_problem{lagen::rescale(p->spec, factor, min_dim)};
    return LAGEN_OK;
  });
}

lagen_status lagen_problem_print(const lagen_problem* p, char** text) {
  if (!p || !text) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *text = dup(lagen::print_problem(p->spec));
    return LAGEN_OK;
  });
}

size_t lagen_problem_assignment_count(const lagen_problem* p) {
  return p ? p->spec.assignments.size() : 0;
}

void lagen_problem_free(lagen_problem* p) { delete p; }

void lagen_options_default(lagen_options* o) {
  if (!o) return;
  lagen::SearchOptions d;
  o->time_limit = d.time_limit;
  o->merging = d.merging;
  o->pruning = d.pruning;
  o->max_iterations = d.max_iterations;
}

lagen_status lagen_generate(const lagen_problem* p, const lagen_options* o, lagen_graph** out) {
  if (!p || !out) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    lagen::SearchOptions so;
    if (o) {
      so.time_limit = o->time_limit;
      so.merging = o->merging != 0;
      so.pruning = o->pruning != 0;
      so.max_iterations = o->max_iterations;
    }
    auto* g = new lagen_graph{lagen::generate(p->spec, so), {}};
    *out = g;
    if (g->graph.no_solution) return fail(LAGEN_ERR_BUDGET, "budget exhausted before any solution");
    return LAGEN_OK;
  });
}

size_t lagen_graph_node_count(const lagen_graph* g) { return g ? g->graph.nodes.size() : 0; }

size_t lagen_graph_edge_count(const lagen_graph* g) { return g ? g->graph.edges.size() : 0; }

double lagen_graph_best_cost(const lagen_graph* g) { return g ? g->graph.best_cost : 0; }

double lagen_graph_first_solution_seconds(const lagen_graph* g) {
  return g ? g->graph.first_solution_seconds : -1;
}

lagen_status lagen_graph_dot(const lagen_graph* g, char** text) {
  if (!g || !text) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *text = dup(g->graph.dot());
    return LAGEN_OK;
  });
}

lagen_status lagen_graph_best(lagen_graph* g, size_t k, size_t* found) {
  if (!g) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    g->paths = lagen::k_best_paths(g->graph, k);
    if (found) *found = g->paths.size();
    return LAGEN_OK;
  });
}

lagen_status lagen_graph_program(const lagen_graph* g, size_t rank, lagen_program** out) {
  if (!g || !out) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  if (rank >= g->paths.size()) return fail(LAGEN_ERR_RANGE, "no program of that rank");
  return guarded([&] {
    *out = new lagen_program{lagen::lower(lagen::program_for(g->graph, g->paths[rank]))};
    return LAGEN_OK;
  });
}

lagen_status lagen_graph_report(const lagen_graph* g, size_t rank, char** text) {
  if (!g || !text) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  if (rank >= g->paths.size()) return fail(LAGEN_ERR_RANGE, "no program of that rank");
  return guarded([&] {
    *text = dup(lagen::derivation_report(g->graph, g->paths[rank]));
    return LAGEN_OK;
  });
}

void lagen_graph_free(lagen_graph* g) { delete g; }

double lagen_program_cost(const lagen_program* p) {
  return p ? p->lowered.program.total_cost : 0;
}

size_t lagen_program_call_count(const lagen_program* p) {
  return p ? p->lowered.program.calls.size() : 0;
}

lagen_status lagen_program_emit(const lagen_program* p, lagen_emit_format f, char** text) {
  if (!p || !text) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  lagen::EmitFormat ef;
  switch (f) {
    case LAGEN_EMIT_TEXT: ef = lagen::EmitFormat::listing_text; break;
    case LAGEN_EMIT_JSON: ef = lagen::EmitFormat::listing_json; break;
    case LAGEN_EMIT_PSEUDOCODE: ef = lagen::EmitFormat::pseudocode; break;
    default: return fail(LAGEN_ERR_ARGUMENT, "unknown format");
  }
  return guarded([&] {
    *text = dup(lagen::emit(p->lowered, ef));
    return LAGEN_OK;
  });
}

void lagen_program_free(lagen_program* p) { delete p; }

lagen_status lagen_verify(const lagen_program* prog, const lagen_problem* p, uint64_t seed,
                          double tol, lagen_report** out) {
  if (!prog || !p || !out) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new lagen_report{lagen::verify(prog->lowered.program, p->spec, seed, tol)};
    return LAGEN_OK;
  });
}

lagen_verify_status lagen_report_status(const lagen_report* r) {
  if (!r) return LAGEN_VERIFY_FAIL;
  switch (r->report.status) {
    case lagen::VerifyStatus::pass: return LAGEN_VERIFY_PASS;
    case lagen::VerifyStatus::ill_conditioned_skip: return LAGEN_VERIFY_SKIP;
    default: return LAGEN_VERIFY_FAIL;
  }
}

double lagen_report_error(const lagen_report* r) { return r ? r->report.max_relative_error : 0; }

lagen_status lagen_report_text(const lagen_report* r, int json, char** text) {
  if (!r || !text) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *text = dup(json ? r->report.json() : r->report.str());
    return LAGEN_OK;
  });
}

void lagen_report_free(lagen_report* r) { delete r; }

lagen_status lagen_kernel_table(char** text) {
  if (!text) return fail(LAGEN_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *text = dup(lagen::kernel_table());
    return LAGEN_OK;
  });
}

}  // extern "C"
