#include <algorithm>
#include <functional>

#include "doctest.h"
#include "helpers.hpp"
#include "lagen/search.hpp"

using namespace th;
using P = lagen::Property;

namespace {

State single(const Operand& lhs, const Expr& rhs) {
  State s;
  s.assignments.push_back({lhs, normalize(rhs)});
  return s;
}

ProblemSpec problem(std::vector<Expr> operands, std::vector<Assignment> as) {
  ProblemSpec p;
  for (const auto& o : operands) p.declarations.push_back({DeclKind::matrix, o.op(), "", ""});
  p.assignments = std::move(as);
  return p;
}

// Applies `kernel` at the match whose value is `want`.
Candidate apply(Search& s, const State& st, const Expr& rep, const std::string& kernel,
                const Expr& want) {
  for (const auto& m : match_all(builtin_kernels(), rep)) {
    if (m.kernel->name != kernel) continue;
    if (normalize(m.sub.instantiate(m.kernel->pattern)) != normalize(want)) continue;
    auto c = s.apply_kernel(st, 0, rep, m);
    REQUIRE(c);
    return *c;
  }
  FAIL("no " << kernel << " match for " << want.str() << " in " << rep.str());
  return {};
}

// Some root-to-terminal path uses a call named `name`.
bool path_through(const DerivationGraph& g, const std::string& name) {
  const auto n = g.nodes.size();
  std::vector<char> from_root(n, 0), to_term(n, 0);
  std::vector<int> work{0};
  from_root[0] = 1;
  while (!work.empty()) {
    int x = work.back();
    work.pop_back();
    for (int e : g.nodes[static_cast<std::size_t>(x)].out) {
      int y = g.edges[static_cast<std::size_t>(e)].to;
      if (!from_root[static_cast<std::size_t>(y)]) {
        from_root[static_cast<std::size_t>(y)] = 1;
        work.push_back(y);
      }
    }
  }
  for (int t : g.terminals) {
    to_term[static_cast<std::size_t>(t)] = 1;
    work.push_back(t);
  }
  while (!work.empty()) {
    int x = work.back();
    work.pop_back();
    for (int e : g.nodes[static_cast<std::size_t>(x)].in) {
      int y = g.edges[static_cast<std::size_t>(e)].from;
      if (!to_term[static_cast<std::size_t>(y)]) {
        to_term[static_cast<std::size_t>(y)] = 1;
        work.push_back(y);
      }
    }
  }
  for (const auto& e : g.edges) {
    if (!from_root[static_cast<std::size_t>(e.from)] || !to_term[static_cast<std::size_t>(e.to)]) {
      continue;
    }
    for (const auto& c : e.calls) {
      if (c.name() == name) return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("priority stack") {
  PriorityStack s;
  s.push(1, 10);
  s.push(0, 20);
  s.push(0, 21);
  s.push(2, 30);
  CHECK(s.size() == 4);
  CHECK(s.pop() == std::pair{0, 21});
  CHECK(s.pop() == std::pair{0, 20});
  CHECK(s.pop() == std::pair{1, 10});
  s.push(1, 11);
  CHECK(s.pop() == std::pair{1, 11});
  CHECK(s.pop() == std::pair{2, 30});
  CHECK(s.empty());
  CHECK_THROWS(s.pop());
}

TEST_CASE("intermediate table replay of A(B+C+D)") {
  const long n = 10;
  auto A = M("A", n, n), B = M("B", n, n), C = M("C", n, n), D = M("D", n, n);
  Operand X("X", n, n);
  Search s(single(X, mul({A, add({B, C, D})})), {"A", "B", "C", "D", "X"});
  const State root = s.graph().nodes[0].state;
  const Expr r0 = root.assignments[0].rhs;

  auto c1 = apply(s, root, r0, "gemm_nz", mul({A, B}));
  auto c2 = apply(s, c1.next, c1.next.assignments[0].rhs, "gemm_nz", mul({A, C}));
  const auto& tab = s.graph().table;
  auto t1 = *tab.find(normalize(mul({A, B})));
  auto t2 = *tab.find(normalize(mul({A, C})));
  auto c3 = apply(s, c2.next, c2.next.assignments[0].rhs, "add",
                  add({Expr::operand(t1), Expr::operand(t2)}));

  const Expr pos = product_of_sums(r0);
  auto c4 = apply(s, root, pos, "add", add({B, C}));
  auto t4 = *tab.find(normalize(add({B, C})));
  auto c5 = apply(s, c4.next, c4.next.assignments[0].rhs, "gemm_nz",
                  mul({A, Expr::operand(t4)}));

  REQUIRE(tab.size() == 4);
  const auto& es = tab.entries();
  CHECK(es[0].op.name() == "T1");
  CHECK(es[0].value == normalize(mul({A, B})));
  CHECK(es[1].op.name() == "T2");
  CHECK(es[1].value == normalize(mul({A, C})));
  CHECK(es[2].op.name() == "T3");
  CHECK(es[2].value == normalize(add({mul({A, B}), mul({A, C})})));
  CHECK(es[3].op.name() == "T4");
  CHECK(es[3].value == normalize(add({B, C})));
  CHECK(c3.calls[0].results[0].name() == "T3");
  CHECK(c5.calls[0].results[0].name() == "T3");
  CHECK(c3.next.key() == c5.next.key());
}

TEST_CASE("merging lowers costs and reactivates pruned nodes") {
  const long n = 4;
  auto A = M("A", n, n);
  Operand X("X", n, n);
  auto st = [&](int k) { return single(X, mul({A, M("B" + std::to_string(k), n, n)})); };
  Search s(st(0), {"A", "X"});
  s.stack().pop();
  auto& g = s.graph();
  const int v10 = s.connect(0, st(1), {}, 10, "a");
  const int v30 = s.connect(v10, st(2), {}, 20, "b");
  const int v44 = s.connect(v30, st(3), {}, 14, "c");
  const int v37 = s.connect(v30, st(4), {}, 7, "d");
  CHECK(s.connect(v44, st(4), {}, 3, "e") == v37);
  const int v5 = s.connect(0, st(5), {}, 5, "f");
  CHECK(g.nodes[static_cast<std::size_t>(v37)].cost == 37);
  while (!s.stack().empty()) s.stack().pop();
  s.set_best(32);
  s.prune(v44);
  s.prune(v37);

  CHECK(s.connect(v5, st(2), {}, 15, "g") == v30);
  CHECK(g.nodes[static_cast<std::size_t>(v30)].cost == 20);
  CHECK(g.nodes[static_cast<std::size_t>(v44)].cost == 34);
  CHECK(g.nodes[static_cast<std::size_t>(v37)].cost == 27);
  CHECK(g.nodes[static_cast<std::size_t>(v44)].pruned);
  CHECK_FALSE(g.nodes[static_cast<std::size_t>(v37)].pruned);
  REQUIRE(s.stack().size() == 1);
  CHECK(s.stack().pop() == std::pair{0, v37});
  CHECK(g.nodes[static_cast<std::size_t>(v30)].in.size() == 2);
}

TEST_CASE("single product") {
  auto A = M("A", 30, 20), B = M("B", 20, 10);
  Operand C("C", 30, 10);
  auto g = generate(problem({A, B}, {{C, mul({A, B})}}));
  auto progs = k_best(g, 1);
  REQUIRE(progs.size() == 1);
  REQUIRE(progs[0].calls.size() == 1);
  CHECK(progs[0].calls[0].kernel->family == "gemm");
  CHECK(progs[0].total_cost == doctest::Approx(2.0 * 30 * 20 * 10));
  CHECK(progs[0].outputs.at(0).first.name() == "C");
  REQUIRE(progs[0].inputs.size() == 2);
  CHECK(g.best_cost == progs[0].total_cost);
}

TEST_CASE("time limit zero") {
  auto A = M("A", 30, 20), B = M("B", 20, 10);
  SearchOptions o;
  o.time_limit = 0;
  auto g = generate(problem({A, B}, {{Operand("C", 30, 10), mul({A, B})}}), o);
  CHECK(g.no_solution);
  CHECK(g.nodes.size() == 1);
  CHECK(k_best(g, 3).empty());
}

TEST_CASE("assigned plain operand") {
  auto A = M("A", 5, 5);
  auto g = generate(problem({A}, {{Operand("X", 5, 5), A}}));
  CHECK_FALSE(g.no_solution);
  CHECK(g.best_cost == 0);
  auto p = k_best(g, 1).at(0);
  CHECK(p.calls.empty());
  CHECK(p.outputs.at(0).second.name() == "A");
}

TEST_CASE("least squares graph has qr and cholesky paths") {
  auto X = M("X", 300, 50, {P::full_rank}), y = M("y", 300, 1);
  SearchOptions o;
  o.time_limit = 10;
  o.pruning = false;
  o.max_iterations = 3000;
  auto g = generate(problem({X, y}, {{Operand("b", 50, 1), mul({I(mul({T(X), X})), T(X), y})}}),
                    o);
  CHECK(path_through(g, "qr"));
  CHECK(path_through(g, "cholesky"));
  auto best = k_best(g, 1).at(0);
  const bool no_inv = std::none_of(best.calls.begin(), best.calls.end(),
                                   [](const KernelCall& c) { return c.name() == "inv"; });
  CHECK(no_inv);
}

TEST_CASE("multiple assignments") {
  const long n = 20;
  auto A = M("A", n, n), B = M("B", n, n), x = M("x", n, 1);
  Operand Y("Y", n, n), z("z", n, 1);
  auto g = generate(problem({A, B, x}, {{Y, mul({A, B})}, {z, mul({Expr::operand(Y), x})}}));
  auto p = k_best(g, 1).at(0);
  REQUIRE(p.outputs.size() == 2);
  CHECK(p.outputs[0].first.name() == "Y");
  CHECK(p.outputs[1].first.name() == "z");
  // Y x must not be rewritten as A (B x)
  CHECK(p.total_cost == doctest::Approx(2.0 * n * n * n + 2.0 * n * n));
}

TEST_CASE("pruning and merging agree on the best cost") {
  const long n = 30;
  auto A = M("A", n, n), B = M("B", n, n), C = M("C", n, n), D = M("D", n, 5),
       E = M("E", 5, n);
  Operand X("X", n, n);
  auto prob = problem({A, B, C, D, E}, {{X, mul({A, add({B, C, mul({D, E})})})}});
  std::vector<double> best;
  std::vector<std::size_t> nodes;
  for (bool merging : {true, false}) {
    for (bool pruning : {true, false}) {
      SearchOptions o;
      o.merging = merging;
      o.pruning = pruning;
      o.max_iterations = 4000;
      auto g = generate(prob, o);
      best.push_back(g.best_cost);
      nodes.push_back(g.nodes.size());
    }
  }
  for (double b : best) CHECK(b == doctest::Approx(best[0]));
}

TEST_CASE("k best paths") {
  const long n = 12;
  auto A = M("A", n, n), B = M("B", n, n), C = M("C", n, n), D = M("D", n, n);
  auto prob = problem({A, B, C, D}, {{Operand("X", n, n), mul({A, add({B, C, D})})}});
  SearchOptions o;
  o.pruning = false;
  o.max_iterations = 500;
  auto g = generate(prob, o);
  auto ps = k_best_paths(g, 5);
  REQUIRE(ps.size() >= 2);
  for (std::size_t i = 1; i < ps.size(); ++i) CHECK(ps[i - 1].cost <= ps[i].cost);
  CHECK(ps[0].cost == doctest::Approx(g.best_cost));
  auto again = k_best_paths(generate(prob, o), 5);
  REQUIRE(again.size() == ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(again[i].edges == ps[i].edges);

  const auto dot = g.dot();
  CHECK(dot.rfind("digraph", 0) == 0);
  CHECK(dot.find("n0 -> ") != std::string::npos);
}

TEST_CASE("unsolvable") {
  auto A = M("A", 5, 5);
  // inverse of a matrix without non-singularity cannot be formed
  Operand X("X", 5, 5);
  State s;
  s.assignments.push_back({X, Expr::inverse(A)});
  CHECK_THROWS(generate(problem({A}, s.assignments)));
}

namespace {
std::size_t count(const std::string& s, const std::string& what) {
  std::size_t n = 0;
  for (auto p = s.find(what); p != std::string::npos; p = s.find(what, p + 1)) ++n;
  return n;
}
}  // namespace

TEST_CASE("dot rendering") {
  DerivationGraph root;
  root.nodes.push_back(Node{});
  auto d = root.dot();
  CHECK(count(d, " [label=") == 1);
  CHECK(count(d, " -> ") == 0);

  // two paths from the root, one of which branches again
  DerivationGraph g;
  for (int i = 0; i < 6; ++i) {
    Node n;
    n.id = i;
    n.cost = 10.0 * i;
    n.terminal = i >= 4;
    g.nodes.push_back(n);
  }
  auto fac = find_factorization("qr");
  for (auto [from, to] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 3}, {3, 4}, {2, 5}}) {
    Edge e;
    e.id = static_cast<int>(g.edges.size());
    e.from = from;
    e.to = to;
    e.cost = 5;
    if (from == 0 && to == 1) {
      KernelCall c;
      c.factorization = fac;
      e.calls.push_back(c);
    }
    g.edges.push_back(e);
  }
  d = g.dot();
  CHECK(count(d, " [label=") - count(d, " -> ") == 6);
  CHECK(count(d, " -> ") == 5);
  CHECK(d.find("n0 -> n1 [label=\"qr 5\"]") != std::string::npos);
  CHECK(d == g.dot());

  auto X = M("X", 300, 50, {P::full_rank}), y = M("y", 300, 1);
  SearchOptions o;
  o.pruning = false;
  o.max_iterations = 3000;
  auto ls = generate(problem({X, y}, {{Operand("b", 50, 1), mul({I(mul({T(X), X})), T(X), y})}}), o);
  auto ld = ls.dot();
  CHECK(ld.find("qr") != std::string::npos);
  CHECK(ld == generate(problem({X, y}, {{Operand("b", 50, 1), mul({I(mul({T(X), X})), T(X), y})}}), o).dot());
}
