#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lagen/lagen.h"

namespace {

enum Exit {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kUnsolvable = 3,
  kVerifyFailed = 4,
  kBudget = 5,
  kInternal = 6,
};

std::string take(char* s) {
  std::string out = s ? s : "";
  lagen_string_free(s);
  return out;
}

int exit_for(lagen_status s) {
  switch (s) {
    case LAGEN_OK: return kOk;
    case LAGEN_ERR_SYNTAX:
    case LAGEN_ERR_UNKNOWN_PROPERTY:
    case LAGEN_ERR_UNDECLARED:
    case LAGEN_ERR_DIMENSION:
    case LAGEN_ERR_INCONSISTENT: return kParse;
    case LAGEN_ERR_UNSOLVABLE: return kUnsolvable;
    case LAGEN_ERR_BUDGET: return kBudget;
    case LAGEN_ERR_ARGUMENT:
    case LAGEN_ERR_IO: return kUsage;
    default: return kInternal;
  }
}

int report_error(lagen_status s, const std::string& what) {
  std::cerr << "lagen: " << what << ": " << lagen_status_string(s);
  const std::string msg = lagen_last_error();
  if (!msg.empty()) std::cerr << ": " << msg;
  std::cerr << '\n';
  return exit_for(s);
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) {
    std::cerr << "lagen: cannot write " << path << '\n';
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generates kernel call sequences for linear algebra assignments."};

  std::string input;
  double time_limit = 30;
  std::uint64_t max_iterations = 0;
  std::size_t k_best = 1;
  bool no_merging = false;
  bool no_pruning = false;
  std::string emit = "text";
  std::string dot_file;
  std::string report_file;
  bool verify = false;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  bool random = false;
  long max_dim = 300;
  bool dump_kernels = false;
  bool desk = false;
  bool print_problem = false;
  bool stats = false;

  app.add_option("input", input, "problem file");
  app.add_option("--time-limit", time_limit, "search budget in seconds")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--max-iterations", max_iterations, "search iteration budget (0: none)");
  app.add_option("--k-best", k_best, "number of programs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--no-merging", no_merging, "disable branch merging");
  app.add_flag("--no-pruning", no_pruning, "disable pruning");
  app.add_option("--emit", emit, "listing format")
      ->check(CLI::IsMember({"text", "json", "pseudocode"}))
      ->capture_default_str();
  app.add_option("--dot", dot_file, "write the derivation graph as DOT");
  app.add_option("--report", report_file, "write derivation (and verification) reports");
  app.add_flag("--verify", verify, "check the programs numerically");
  app.add_option("--seed", seed, "seed for instances and random problems")->capture_default_str();
  app.add_option("--tol", tol, "relative error tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--random-problem", random, "generate a random problem instead of reading one");
  app.add_option("--max-dim", max_dim, "largest random dimension")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--dump-kernels", dump_kernels, "print the kernel table and exit");
  app.add_flag("--desk", desk, "scale sizes by 1/10, at least 20");
  app.add_flag("--print-problem", print_problem, "print the (scaled) problem to stderr");
  app.add_flag("--stats", stats, "print search statistics to stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  if (dump_kernels) {
    char* t = nullptr;
    auto s = lagen_kernel_table(&t);
    if (s != LAGEN_OK) return report_error(s, "kernel table");
    std::cout << take(t);
    return kOk;
  }

  lagen_problem* problem = nullptr;
  lagen_status s;
  if (random) {
    s = lagen_problem_random(seed, max_dim, &problem);
    if (s != LAGEN_OK) return report_error(s, "random problem");
  } else {
    if (input.empty()) {
      std::cerr << "lagen: no input file (or --random-problem)\n";
      return kUsage;
    }
    s = lagen_problem_load(input.c_str(), &problem);
    if (s != LAGEN_OK) return report_error(s, input);
  }
  if (desk) {
    lagen_problem* scaled = nullptr;
    s = lagen_problem_rescale(problem, 0.1, 20, &scaled);
    lagen_problem_free(problem);
    if (s != LAGEN_OK) return report_error(s, "rescale");
    problem = scaled;
  }
  if (print_problem) {
    char* t = nullptr;
    if (lagen_problem_print(problem, &t) == LAGEN_OK) std::cerr << take(t);
  }

  lagen_options opt;
  lagen_options_default(&opt);
  opt.time_limit = time_limit;
  opt.max_iterations = max_iterations;
  opt.merging = !no_merging;
  opt.pruning = !no_pruning;

  lagen_graph* graph = nullptr;
  s = lagen_generate(problem, &opt, &graph);
  if (graph && !dot_file.empty()) {
    char* t = nullptr;
    if (lagen_graph_dot(graph, &t) == LAGEN_OK && !write_file(dot_file, take(t))) {
      lagen_graph_free(graph);
      lagen_problem_free(problem);
      return kUsage;
    }
  }
  if (stats && graph) {
    std::cerr << "nodes: " << lagen_graph_node_count(graph)
              << "\nedges: " << lagen_graph_edge_count(graph)
              << "\nfirst solution: " << lagen_graph_first_solution_seconds(graph) << " s\n";
  }
  if (s != LAGEN_OK) {
    int code = report_error(s, "generate");
    lagen_graph_free(graph);
    lagen_problem_free(problem);
    return code;
  }

  std::size_t found = 0;
  s = lagen_graph_best(graph, k_best, &found);
  if (s != LAGEN_OK) return report_error(s, "k best");

  const lagen_emit_format fmt = emit == "json"         ? LAGEN_EMIT_JSON
                                : emit == "pseudocode" ? LAGEN_EMIT_PSEUDOCODE
                                                       : LAGEN_EMIT_TEXT;
  int code = kOk;
  std::string reports;
  if (fmt == LAGEN_EMIT_JSON && found > 1) std::cout << "[\n";
  for (std::size_t i = 0; i < found; ++i) {
    lagen_program* prog = nullptr;
    s = lagen_graph_program(graph, i, &prog);
    if (s != LAGEN_OK) {
      code = report_error(s, "program");
      break;
    }
    char* t = nullptr;
    s = lagen_program_emit(prog, fmt, &t);
    if (s != LAGEN_OK) {
      lagen_program_free(prog);
      code = report_error(s, "emit");
      break;
    }
    const std::string listing = take(t);
    if (fmt == LAGEN_EMIT_JSON) {
      if (i) std::cout << ",\n";
      std::cout << listing;
    } else {
      if (found > 1) std::cout << "# program " << i + 1 << ", cost " << lagen_program_cost(prog) << '\n';
      std::cout << listing;
      if (found > 1 && i + 1 < found) std::cout << '\n';
    }
    if (!report_file.empty()) {
      char* r = nullptr;
      if (lagen_graph_report(graph, i, &r) == LAGEN_OK) {
        reports += "# program " + std::to_string(i + 1) + "\n" + take(r);
      }
    }
    if (verify) {
      lagen_report* rep = nullptr;
      s = lagen_verify(prog, problem, seed, tol, &rep);
      if (s != LAGEN_OK) {
        lagen_program_free(prog);
        code = report_error(s, "verify");
        break;
      }
      char* r = nullptr;
      lagen_report_text(rep, 0, &r);
      const std::string text = take(r);
      std::cerr << "# verification of program " << i + 1 << "\n" << text;
      reports += "# verification of program " + std::to_string(i + 1) + "\n" + text;
      if (lagen_report_status(rep) == LAGEN_VERIFY_FAIL) code = kVerifyFailed;
      lagen_report_free(rep);
    }
    lagen_program_free(prog);
  }
  if (fmt == LAGEN_EMIT_JSON && found > 1) std::cout << "\n]\n";
  if (!report_file.empty() && !write_file(report_file, reports) && code == kOk) code = kUsage;

  lagen_graph_free(graph);
  lagen_problem_free(problem);
  return code;
}
