#pragma once

#include <chrono>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lagen/chain.hpp"
#include "lagen/program.hpp"
#include "lagen/rewrite.hpp"

namespace lagen {

class UnsolvableProblem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SearchOptions {
  double time_limit = 30.0;  // seconds
  bool merging = true;
  bool pruning = true;
  std::size_t successor_cap = 64;
  std::size_t max_iterations = 0;  // 0: unlimited
};

/// Normal-form value -> uniquely named intermediate operand.
class IntermediateTable {
 public:
  struct Entry {
    Operand op;
    Expr value;
  };

  explicit IntermediateTable(std::set<std::string> reserved = {});

  /// Existing operand for `full`, or a fresh T<k> with inferred properties.
  Operand intermediate_for(const Expr& full);
  std::optional<Operand> find(const Expr& full) const;
  /// Replaces intermediates by their values and normalizes.
  Expr full_value(const Expr& e) const;
  const Expr* value_of(const std::string& name) const;
  /// Outputs of factorizing `target`; the same names every time for the
  /// same factorization of the same value.
  std::vector<Operand> factors_for(const Factorization& f, const Operand& target);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::string fresh(const std::string& prefix);

  std::set<std::string> used_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> by_value_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::map<std::string, std::vector<Operand>> factors_;
  std::map<std::string, int> counters_;
};

/// Remaining computation: one pending right-hand side per input assignment.
struct State {
  std::vector<Assignment> assignments;

  bool done(std::size_t i) const { return assignments[i].rhs.is(ExprKind::operand); }
  bool terminal() const;
  std::string key() const;
  std::string str() const;
};

struct Node {
  int id = 0;
  State state;
  std::string key;
  double cost = 0;
  int successor_count = 0;
  bool pruned = false;
  bool terminal = false;
  bool exhausted = false;
  std::vector<int> in;
  std::vector<int> out;
};

struct Edge {
  int id = 0;
  int from = 0;
  int to = 0;
  std::vector<KernelCall> calls;
  double cost = 0;
  std::string label;
};

/// Lowest priority number first, last in first out within a priority.
class PriorityStack {
 public:
  void push(int priority, int value);
  std::pair<int, int> pop();
  bool empty() const { return size_ == 0; }
  std::size_t size() const { return size_; }

 private:
  std::map<int, std::vector<int>> stacks_;
  std::size_t size_ = 0;
};

struct DerivationGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  IntermediateTable table;
  std::vector<int> terminals;
  double best_cost = std::numeric_limits<double>::infinity();
  bool no_solution = true;
  double first_solution_seconds = -1;
  double elapsed_seconds = 0;
  std::size_t iterations = 0;

  /// DOT rendering: nodes labeled with cost, edges with kernels and cost.
  std::string dot() const;
};

struct Candidate {
  State next;
  std::vector<KernelCall> calls;
  double cost = 0;
  std::string label;
  int category = 0;
};

/// Best-first derivation graph construction.
class Search {
 public:
  Search(const ProblemSpec& problem, SearchOptions options = {});
  /// Builds the search around an explicit root state (used by tests).
  Search(State root, std::set<std::string> reserved, SearchOptions options = {});

  /// Runs the main loop until the stack drains or a budget is hit.
  void run();
  /// One loop iteration; false once the stack is empty or a budget is hit.
  bool step();

  /// Generates the next successor of `v` into the graph; nullopt once all
  /// successors have been generated.
  std::optional<int> next_successor(int v);
  /// Adds the target of an edge from `from`, merging with an existing node
  /// with the same state when merging is enabled. Returns the target id.
  int connect(int from, const State& next, std::vector<KernelCall> calls, double cost,
              std::string label);

  /// Successors of a node in generation order (computed on demand).
  const std::vector<Candidate>& candidates(int v);

  // Single-step transformations, exposed for replaying derivations.
  std::optional<Candidate> apply_kernel(const State& s, std::size_t assignment,
                                        const Expr& representation, const KernelMatch& m);
  Candidate complete(const State& s, std::size_t assignment);

  DerivationGraph& graph() { return g_; }
  const DerivationGraph& graph() const { return g_; }
  PriorityStack& stack() { return stack_; }
  void prune(int v) { g_.nodes[static_cast<std::size_t>(v)].pruned = true; }
  void set_best(double c) { g_.best_cost = c; }

 private:
  struct Pending {
    std::vector<Candidate> items;
    std::size_t stage = 0;  // 0: nothing, 1: constructive, 2: all
    std::size_t next = 0;
  };

  void init(State root);
  void settle(State& s) const;
  std::set<std::string> blocked(const State& s, std::size_t i) const;
  void extend(int v);
  std::vector<Candidate> constructive(const State& s);
  std::vector<Candidate> matches(const State& s, bool pos_only, bool skip_pos);
  std::vector<Candidate> cse_and_rules(const State& s);
  std::vector<Candidate> factorizations(const State& s);

  Operand construct(const Expr& e, std::vector<KernelCall>& calls);
  Expr leafify(const Expr& f, std::vector<KernelCall>& calls);
  Expr reduce_term(const Expr& term, std::vector<KernelCall>& calls);
  Operand finish(Expr r, std::vector<KernelCall>& calls);
  Operand name_value(const Expr& value);

  void relax(int from);
  void touched(int v);
  bool out_of_budget() const;

  SearchOptions opt_;
  DerivationGraph g_;
  PriorityStack stack_;
  std::unordered_map<std::string, int> by_key_;
  std::unordered_map<int, Pending> pending_;
  std::chrono::steady_clock::time_point start_;
};

DerivationGraph generate(const ProblemSpec& problem, const SearchOptions& options = {});

struct Path {
  std::vector<int> edges;
  double cost = 0;
};

/// Up to K root-to-terminal paths in nondecreasing cost; ties by call count,
/// then edge ids.
std::vector<Path> k_best_paths(const DerivationGraph& g, std::size_t k);
Program program_for(const DerivationGraph& g, const Path& p);
std::vector<Program> k_best(const DerivationGraph& g, std::size_t k);

}  // namespace lagen
