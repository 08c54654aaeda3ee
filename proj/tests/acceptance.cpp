// Acceptance criteria 1-10; one line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <sstream>
#include <string>

#include "lagen/chain.hpp"
#include "lagen/codegen.hpp"
#include "lagen/dsl.hpp"
#include "lagen/infer.hpp"
#include "lagen/matching.hpp"
#include "lagen/rewrite.hpp"
#include "lagen/search.hpp"
#include "lagen/verify.hpp"

using namespace lagen;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

bool level3(const KernelCall& c) {
  static const std::vector<std::string> mm = {"gemm", "gemm_nz", "syrk_t", "syrk_t_nz",
                                              "syrk_n", "syrk_n_nz", "trmm_left", "trmm_right",
                                              "trsm_left", "trsm_right"};
  return !c.is_factorization() && std::count(mm.begin(), mm.end(), c.name());
}

// Cheapest root-to-terminal path through some edge with a call named `name`.
std::optional<Path> cheapest_through(const DerivationGraph& g, const std::string& name) {
  const auto n = g.nodes.size();
  const double inf = std::numeric_limits<double>::infinity();
  auto dijkstra = [&](std::vector<int> sources, bool forward) {
    std::vector<double> d(n, inf);
    std::vector<int> via(n, -1);
    using Q = std::pair<double, int>;
    std::priority_queue<Q, std::vector<Q>, std::greater<>> q;
    for (int s : sources) {
      d[static_cast<std::size_t>(s)] = 0;
      q.push({0, s});
    }
    while (!q.empty()) {
      auto [dv, v] = q.top();
      q.pop();
      if (dv > d[static_cast<std::size_t>(v)]) continue;
      const auto& node = g.nodes[static_cast<std::size_t>(v)];
      for (int eid : forward ? node.out : node.in) {
        const auto& e = g.edges[static_cast<std::size_t>(eid)];
        int w = forward ? e.to : e.from;
        if (dv + e.cost < d[static_cast<std::size_t>(w)]) {
          d[static_cast<std::size_t>(w)] = dv + e.cost;
          via[static_cast<std::size_t>(w)] = eid;
          q.push({dv + e.cost, w});
        }
      }
    }
    return std::pair{d, via};
  };
  auto [df, vf] = dijkstra({0}, true);
  auto [db, vb] = dijkstra(g.terminals, false);
  int best = -1;
  double best_cost = inf;
  for (const auto& e : g.edges) {
    bool has = false;
    for (const auto& c : e.calls) has = has || c.name() == name;
    if (!has) continue;
    double c = df[static_cast<std::size_t>(e.from)] + e.cost + db[static_cast<std::size_t>(e.to)];
    if (c < best_cost) {
      best_cost = c;
      best = e.id;
    }
  }
  if (best < 0) return std::nullopt;
  Path p;
  p.cost = best_cost;
  const auto& e = g.edges[static_cast<std::size_t>(best)];
  for (int v = e.from; v != 0;) {
    int eid = vf[static_cast<std::size_t>(v)];
    p.edges.push_back(eid);
    v = g.edges[static_cast<std::size_t>(eid)].from;
  }
  std::reverse(p.edges.begin(), p.edges.end());
  p.edges.push_back(best);
  for (int v = e.to; !g.nodes[static_cast<std::size_t>(v)].terminal;) {
    int eid = vb[static_cast<std::size_t>(v)];
    p.edges.push_back(eid);
    v = g.edges[static_cast<std::size_t>(eid)].to;
  }
  return p;
}

// Values of kernel results in terms of the program's inputs.
std::vector<Expr> expanded_values(const Program& p) {
  std::map<std::string, Expr> known;
  std::vector<Expr> out;
  for (const auto& c : p.calls) {
    if (c.is_factorization()) {
      out.push_back(Expr());
      continue;
    }
    Expr v = normalize(substitute(c.value, known));
    known[c.results[0].name()] = v;
    out.push_back(v);
  }
  return out;
}

// 1: distributivity on the y_k update
Outcome criterion1() {
  const auto t0 = Clock::now();
  const char* text = R"(m = 1000
n = 5000
Matrix H(m, n) <FullRank>
Matrix Hd(n, m) <FullRank>
IdentityMatrix I_n(n, n)
ColumnVector y(m) <>
ColumnVector x_k(n) <>
ColumnVector y_k(n) <>
y_k = Hd*y + (I_n - Hd*H)*x_k
)";
  auto full = parse_problem(text);
  SearchOptions o;
  o.time_limit = 10;
  auto g = generate(full, o);
  if (g.no_solution) return {false, "no solution at full size"};
  auto prog = k_best(g, 1).at(0);
  const double m = 1000, n = 5000, bound = 10 * (2 * m * n + 2 * n * n);
  const bool mm = std::any_of(prog.calls.begin(), prog.calls.end(), level3);

  auto desk = rescale(full, 0.1, 20);
  auto dg = generate(desk, o);
  auto dp = k_best(dg, 1).at(0);
  auto r = verify(dp, desk, 1, 1e-6);
  const double t = seconds_since(t0);
  Outcome out;
  out.pass = !mm && prog.total_cost <= bound && r.status == VerifyStatus::pass && t < 30;
  out.detail = "cost " + num(prog.total_cost) + " <= " + num(bound) +
               (mm ? ", uses a matrix-matrix kernel" : ", matrix-vector only") +
               ", desk error " + num(r.max_relative_error) + ", " + num(t) + " s";
  return out;
}

// 2: QR and Cholesky paths for least squares
Outcome criterion2() {
  auto spec = parse_problem(R"(Matrix X(300, 50) <FullRank>
ColumnVector y(300) <>
ColumnVector b(50) <>
b = inv(trans(X)*X)*trans(X)*y
)");
  SearchOptions o;
  o.time_limit = 10;
  o.pruning = false;
  o.max_iterations = 3000;
  auto g = generate(spec, o);
  auto qr = cheapest_through(g, "qr");
  auto chol = cheapest_through(g, "cholesky");
  if (!qr || !chol) return {false, std::string(qr ? "" : "no qr path ") + (chol ? "" : "no cholesky path")};
  auto pq = program_for(g, *qr);
  auto pc = program_for(g, *chol);
  auto rq = verify(pq, spec, 42, 1e-6);
  auto rc = verify(pc, spec, 42, 1e-6);
  auto best = k_best(g, 1).at(0);
  auto uses = [](const Program& p, const char* name) {
    return std::any_of(p.calls.begin(), p.calls.end(),
                       [&](const KernelCall& c) { return c.name() == name; });
  };
  Outcome out;
  out.pass = uses(pq, "qr") && uses(pc, "cholesky") && rq.status == VerifyStatus::pass && rc.status == VerifyStatus::pass &&
             best.total_cost <= pq.total_cost && best.total_cost <= pc.total_cost;
  out.detail = "qr path " + num(pq.total_cost) + " (error " + num(rq.max_relative_error) +
               "), cholesky path " + num(pc.total_cost) + " (error " +
               num(rc.max_relative_error) + "), best " + num(best.total_cost);
  return out;
}

// 3: spd inference and Cholesky for the regularized normal equations
Outcome criterion3() {
  const auto t0 = Clock::now();
  auto spec = parse_problem(R"(Matrix A(300, 20) <FullRank>
Scalar alpha <Positive>
ColumnVector b(300) <>
ColumnVector x(20) <>
IdentityMatrix I_n(20, 20)
x = inv(trans(A)*A + alpha*alpha*I_n)*trans(A)*b
)");
  auto A = Expr::operand(spec.find("A")->operand);
  auto alpha = Expr::operand(spec.find("alpha")->operand);
  auto I = Expr::operand(spec.find("I_n")->operand);
  auto M = normalize(Expr::plus({Expr::times({Expr::transpose(A), A}), Expr::times({alpha, alpha, I})}));
  const bool spd = infer(M).has(Property::spd);
  SearchOptions o;
  o.time_limit = 5;
  auto g = generate(spec, o);
  auto p = k_best(g, 1).at(0);
  bool chol = false, lu = false;
  double chol_flops = 0;
  for (const auto& c : p.calls) {
    if (c.name() == "cholesky") {
      chol = true;
      chol_flops = c.flops;
    }
    lu = lu || c.name() == "lu";
  }
  const double want = 20.0 * 20 * 20 / 3;
  const double t = seconds_since(t0);
  Outcome out;
  out.pass = spd && chol && !lu && std::abs(chol_flops - want) < 1e-9 * want && t < 10;
  out.detail = std::string(spd ? "spd inferred" : "spd NOT inferred") +
               (chol ? ", cholesky " + num(chol_flops) + " flops" : ", no cholesky") +
               (lu ? ", uses lu" : "") + ", " + num(t) + " s";
  return out;
}

// 4: W^T A formed once in the stochastic Newton update
Outcome criterion4() {
  const std::string path = std::string(LAGEN_CORPUS_DIR) + "/stochastic_newton.la";
  auto spec = parse_problem_file(path);
  for (auto& [name, v] : spec.sizes) {
    if (name == "l") v = 25;
    if (name == "n") v = 40;
    if (name == "m") v = 200;
  }
  spec = parse_problem(print_problem(spec));
  SearchOptions o;
  o.time_limit = 10;
  auto g = generate(spec, o);
  if (g.no_solution) return {false, "no solution"};
  auto p = k_best(g, 1).at(0);
  auto W = Expr::operand(spec.find("W")->operand);
  auto A = Expr::operand(spec.find("A")->operand);
  const Expr wa = normalize(Expr::times({Expr::transpose(W), A}));
  const Expr aw = normalize(Expr::times({Expr::transpose(A), W}));
  int count = 0;
  for (const auto& v : expanded_values(p)) {
    if (v.valid() && (v == wa || v == aw)) ++count;
  }
  auto r = verify(p, spec, 9, 1e-6);
  Outcome out;
  out.pass = count == 1 && r.status == VerifyStatus::pass;
  out.detail = "W^T A computed " + std::to_string(count) + " time(s), " + std::to_string(p.calls.size()) +
               " calls, error " + num(r.max_relative_error);
  return out;
}

// 5: chain DP against exhaustive minimization
Outcome criterion5() {
  const auto t0 = Clock::now();
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> len(1, 6), dimi(0, 4), kind(0, 9);
  const long sizes[] = {1, 4, 9, 25, 60};
  int mismatches = 0, errors = 0;
  for (int round = 0; round < 200; ++round) {
    const int n = len(rng);
    std::vector<long> d(static_cast<std::size_t>(n + 1));
    for (auto& x : d) x = sizes[dimi(rng)];
    std::vector<ChainElement> es;
    for (int i = 0; i < n; ++i) {
      long r = d[static_cast<std::size_t>(i)], c = d[static_cast<std::size_t>(i + 1)];
      const std::string name = "X" + std::to_string(i);
      const int k = kind(rng);
      Expr e;
      if (r == c && r > 1 && k < 6) {
        PropertySet ps;
        if (k == 0) ps = {Property::lower_triangular, Property::non_singular};
        if (k == 1) ps = {Property::upper_triangular, Property::non_singular};
        if (k == 2) ps = {Property::diagonal, Property::non_singular};
        if (k == 3) ps = {Property::spd};
        if (k == 4) ps = {Property::non_singular};
        if (k == 5) ps = {Property::symmetric, Property::non_singular};
        auto x = Expr::operand(Operand(name, r, c, close(ps, r, c)));
        e = k % 2 ? Expr::inverse(x) : x;
        if (k == 0 && round % 2 == 0) e = Expr::inverse(Expr::transpose(x));
      } else if (k >= 8 && r > 1 && c > 1) {
        e = Expr::transpose(Expr::operand(Operand(name, c, r)));
      } else {
        e = Expr::operand(Operand(name, r, c));
      }
      es.push_back(ChainElement::from(e));
    }
    try {
      if (matrix_chain(es).cost != chain_cost_exhaustive(es)) ++mismatches;
    } catch (const std::exception&) {
      ++errors;
    }
  }
  const double t = seconds_since(t0);
  Outcome out;
  out.pass = mismatches == 0 && errors == 0 && t < 60;
  out.detail = std::to_string(mismatches) + " mismatches, " + std::to_string(errors) +
               " errors over 200 chains, " + num(t) + " s";
  return out;
}

// 6: merging shrinks the graph for A(B+C+DE)
Outcome criterion6() {
  auto spec = parse_problem(R"(n = 40
Matrix A(n, n) <>
Matrix B(n, n) <>
Matrix C(n, n) <>
Matrix D(n, n) <>
Matrix E(n, n) <>
Matrix X(n, n) <>
X = A*(B + C + D*E)
)");
  SearchOptions o;
  o.time_limit = 60;
  o.max_iterations = 3000;
  auto with = generate(spec, o);
  o.merging = false;
  auto without = generate(spec, o);
  Outcome out;
  out.pass = with.nodes.size() < without.nodes.size() && with.best_cost == without.best_cost;
  out.detail = std::to_string(with.nodes.size()) + " nodes merged vs " +
               std::to_string(without.nodes.size()) + " unmerged, best " + num(with.best_cost) +
               " / " + num(without.best_cost);
  return out;
}

// 7: four-way agreement of pruning and merging on small problems
Outcome criterion7() {
  RandomProblemConfig c;
  c.min_operands = 3;
  c.max_operands = 4;
  c.max_dim = 300;
  int disagree = 0, unfinished = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto spec = random_problem(c, 700 + seed);
    std::vector<double> best;
    for (bool merging : {true, false}) {
      for (bool pruning : {true, false}) {
        SearchOptions o;
        o.time_limit = 60;
        o.merging = merging;
        o.pruning = pruning;
        auto g = generate(spec, o);
        if (g.elapsed_seconds >= o.time_limit) ++unfinished;
        best.push_back(g.best_cost);
      }
    }
    for (double b : best) {
      if (b != best[0]) {
        ++disagree;
        break;
      }
    }
  }
  Outcome out;
  out.pass = disagree == 0 && unfinished == 0;
  out.detail = std::to_string(disagree) + " disagreements over 50 problems, " +
               std::to_string(unfinished) + " searches hit the budget";
  return out;
}

// 8: first solution under a second on the desk-scale corpus
Outcome criterion8() {
  double worst = 0;
  std::string worst_name;
  int files = 0, missing = 0;
  for (const auto& e : std::filesystem::directory_iterator(LAGEN_CORPUS_DIR)) {
    if (e.path().extension() != ".la") continue;
    ++files;
    auto spec = desk_scale(parse_problem_file(e.path().string()));
    SearchOptions o;
    o.time_limit = 2;
    auto g = generate(spec, o);
    if (g.first_solution_seconds < 0) {
      ++missing;
      continue;
    }
    if (g.first_solution_seconds > worst) {
      worst = g.first_solution_seconds;
      worst_name = e.path().filename().string();
    }
  }
  Outcome out;
  out.pass = files > 0 && missing == 0 && worst < 1.0;
  out.detail = std::to_string(files) + " problems, slowest first solution " + num(worst) + " s (" +
               worst_name + ")" + (missing ? ", " + std::to_string(missing) + " without" : "");
  return out;
}

// 9: end-to-end verification of random problems
Outcome criterion9() {
  RandomProblemConfig c;
  c.max_dim = 300;
  int programs = 0, passed = 0, failed = 0, skipped = 0, unsolved = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto spec = random_problem(c, 9000 + seed);
    SearchOptions o;
    o.time_limit = 20;
    o.max_iterations = 1500;
    DerivationGraph g;
    try {
      g = generate(spec, o);
    } catch (const std::exception&) {
      ++unsolved;
      continue;
    }
    if (g.no_solution) {
      ++unsolved;
      continue;
    }
    for (const auto& p : k_best(g, 3)) {
      ++programs;
      auto r = verify(p, spec, seed, 1e-6);
      if (r.status == VerifyStatus::pass) ++passed;
      if (r.status == VerifyStatus::fail) ++failed;
      if (r.status == VerifyStatus::ill_conditioned_skip) ++skipped;
    }
  }
  const double skip_rate = programs ? static_cast<double>(skipped) / programs : 1;
  Outcome out;
  out.pass = failed == 0 && unsolved == 0 && skip_rate < 0.1;
  out.detail = std::to_string(programs) + " programs: " + std::to_string(passed) + " pass, " +
               std::to_string(failed) + " fail, " + std::to_string(skipped) +
               " skipped (rate " + num(skip_rate) + "), " + std::to_string(unsolved) + " unsolved";
  return out;
}

// 10: intermediate table for A(B+C+D)
Outcome criterion10() {
  const long n = 10;
  auto M = [&](const char* name) { return Expr::operand(Operand(name, n, n)); };
  auto A = M("A"), B = M("B"), C = M("C"), D = M("D");
  State root;
  root.assignments.push_back({Operand("X", n, n), normalize(Expr::times({A, Expr::plus({B, C, D})}))});
  Search s(root, {"A", "B", "C", "D", "X"});
  const State& r0 = s.graph().nodes[0].state;

  auto apply = [&](const State& st, const Expr& rep, const std::string& kernel,
                   const Expr& want) -> std::optional<Candidate> {
    for (const auto& m : match_all(builtin_kernels(), rep)) {
      if (m.kernel->name != kernel) continue;
      if (normalize(m.sub.instantiate(m.kernel->pattern)) != normalize(want)) continue;
      return s.apply_kernel(st, 0, rep, m);
    }
    return std::nullopt;
  };
  const auto& tab = s.graph().table;
  auto c1 = apply(r0, r0.assignments[0].rhs, "gemm_nz", Expr::times({A, B}));
  if (!c1) return {false, "AB not applicable"};
  auto c2 = apply(c1->next, c1->next.assignments[0].rhs, "gemm_nz", Expr::times({A, C}));
  if (!c2) return {false, "AC not applicable"};
  auto t1 = *tab.find(normalize(Expr::times({A, B})));
  auto t2 = *tab.find(normalize(Expr::times({A, C})));
  auto c3 = apply(c2->next, c2->next.assignments[0].rhs, "add",
                  Expr::plus({Expr::operand(t1), Expr::operand(t2)}));
  if (!c3) return {false, "T1 + T2 not applicable"};
  auto c4 = apply(r0, product_of_sums(r0.assignments[0].rhs), "add", Expr::plus({B, C}));
  if (!c4) return {false, "B + C not applicable"};
  auto t4 = *tab.find(normalize(Expr::plus({B, C})));
  auto c5 = apply(c4->next, c4->next.assignments[0].rhs, "gemm_nz",
                  Expr::times({A, Expr::operand(t4)}));
  if (!c5) return {false, "A T4 not applicable"};

  const std::vector<std::pair<std::string, Expr>> want = {
      {"T1", normalize(Expr::times({A, B}))},
      {"T2", normalize(Expr::times({A, C}))},
      {"T3", normalize(Expr::plus({Expr::times({A, B}), Expr::times({A, C})}))},
      {"T4", normalize(Expr::plus({B, C}))},
  };
  bool same = tab.size() == want.size();
  std::string listing;
  for (std::size_t i = 0; i < tab.entries().size(); ++i) {
    const auto& e = tab.entries()[i];
    listing += (i ? ", " : "") + e.op.name() + ": " + e.value.str();
    if (i < want.size()) same = same && e.op.name() == want[i].first && e.value == want[i].second;
  }
  const bool reuse = c5->calls.at(0).results.at(0).name() == "T3";
  Outcome out;
  out.pass = same && reuse;
  out.detail = "{" + listing + "}" + (reuse ? ", second path reuses T3" : ", T3 not reused");
  return out;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10,
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %zu: %s  %s\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
