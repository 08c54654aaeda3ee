#include <algorithm>
#include <functional>

#include "doctest.h"
#include "helpers.hpp"
#include "lagen/codegen.hpp"
#include "lagen/matching.hpp"

using namespace th;
using P = lagen::Property;
using SF = lagen::StorageFormat;

namespace {

ProblemSpec problem(std::vector<Expr> operands, std::vector<Assignment> as) {
  ProblemSpec p;
  for (const auto& o : operands) p.declarations.push_back({DeclKind::matrix, o.op(), "", ""});
  p.assignments = std::move(as);
  return p;
}

KernelCall make(const std::string& kernel, const Expr& subject, const Expr& want,
                const std::string& result) {
  const Expr s = normalize(subject);
  for (const auto& m : match_all(builtin_kernels(), s)) {
    if (m.kernel->name != kernel) continue;
    const Expr v = normalize(m.sub.instantiate(m.kernel->pattern));
    if (v != normalize(want)) continue;
    KernelCall c;
    c.kernel = m.kernel;
    c.sub = m.sub;
    c.value = v;
    c.flops = cost(*m.kernel, m.sub);
    c.results = {Operand(result, v.rows(), v.cols(), infer(v), Origin::intermediate)};
    return c;
  }
  FAIL("no " << kernel << " match for " << want.str());
  return {};
}

KernelCall factor(const std::string& name, const Operand& target) {
  const Factorization* f = find_factorization(name);
  KernelCall c;
  c.factorization = f;
  c.target = target;
  std::vector<std::string> names;
  for (const auto& o : f->outputs(target)) names.push_back(o.role + "1");
  c.results = factor_operands(*f, target, names);
  c.value = f->product(c.results);
  c.flops = cost(*f, f->dims(target));
  return c;
}

Program program(std::vector<KernelCall> calls,
                std::vector<std::pair<std::string, Operand>> outputs) {
  Program p;
  p.calls = std::move(calls);
  for (const auto& [name, op] : outputs) {
    p.outputs.emplace_back(Operand(name, op.rows(), op.cols()), op);
  }
  for (const auto& c : p.calls) p.total_cost += c.flops;
  collect_inputs(p);
  return p;
}

// Minimum conversions by enumerating, at every read, "keep" or a conversion
// to each format.
std::size_t brute_force_conversions(const Lowered& l) {
  const Program& p = l.program;
  std::map<std::string, std::vector<SF>> reads;
  std::map<std::string, SF> initial;
  for (const auto& [name, f] : l.plan.format) initial[name] = f;
  for (const auto& c : p.calls) {
    for (const auto& [name, f] : required_formats(c)) reads[name].push_back(f);
  }
  for (const auto& [lhs, op] : p.outputs) {
    if (!op.is_scalar()) reads[op.name()].push_back(SF::full);
  }
  const SF all[] = {SF::full, SF::lower_triangular_half, SF::upper_triangular_half,
                    SF::diagonal_vector};
  std::size_t total = 0;
  for (const auto& [name, rs] : reads) {
    std::size_t best = 1000;
    std::function<void(std::size_t, SF, std::size_t)> go = [&](std::size_t i, SF cur,
                                                              std::size_t n) {
      if (n >= best) return;
      if (i == rs.size()) {
        best = n;
        return;
      }
      if (satisfies(cur, rs[i])) go(i + 1, cur, n);
      for (SF f : all) {
        if (f != cur && satisfies(f, rs[i])) go(i + 1, f, n + 1);
      }
    };
    go(0, initial.at(name), 0);
    total += best;
  }
  return total;
}

void check_lowering(const Program& p, std::uint64_t seed) {
  const Lowered l = lower(p);
  CHECK(audit(l).empty());
  const auto inst = instantiate(p.inputs, seed);
  const Values sym = outputs(p, execute(p, inst));
  const Values low = execute_lowered(l, inst);
  for (const auto& [name, v] : sym) {
    CAPTURE(name);
    REQUIRE(low.count(name));
    CHECK(low.at(name).rows() == v.rows());
    CHECK((low.at(name).array() == v.array()).all());
  }
  const std::string j = emit(l, EmitFormat::listing_json);
  const Lowered back = parse_listing_json(j);
  CHECK(emit(back, EmitFormat::listing_json) == j);
  CHECK(emit(back, EmitFormat::pseudocode) == emit(l, EmitFormat::pseudocode));
  REQUIRE(back.program.calls.size() == p.calls.size());
  for (std::size_t i = 0; i < p.calls.size(); ++i) {
    CHECK(back.program.calls[i].str() == p.calls[i].str());
    CHECK(back.program.calls[i].value == p.calls[i].value);
    CHECK(back.program.calls[i].flops == p.calls[i].flops);
  }
  if (p.calls.size() <= 6) CHECK(l.plan.conversions.size() == brute_force_conversions(l));
}

}  // namespace

TEST_CASE("overwritten argument is reused when dead") {
  const long n = 8;
  auto A = M("A", n, n), B = M("B", n, n), C = M("C", n, n), D = M("D", n, n);
  auto g = make("gemm", add({mul({A, B}), C}), add({mul({A, B}), C}), "T1");
  auto p = program({g}, {{"X", g.results[0]}});
  auto plan = plan_memory(p);
  CHECK(plan.copies.empty());
  CHECK(plan.in_place.at(0));
  CHECK(plan.buffer.at("T1") == plan.buffer.at("C"));
  check_lowering(p, 1);

  auto h = make("gemm_nz", mul({C, D}), mul({C, D}), "T2");
  auto q = program({g, h}, {{"X", g.results[0]}, {"Y", h.results[0]}});
  auto plan2 = plan_memory(q);
  REQUIRE(plan2.copies.size() == 1);
  CHECK(plan2.copies[0].operand.name() == "C");
  CHECK(plan2.copies[0].before == 0);
  CHECK(plan2.buffer.at("T1") != plan2.buffer.at("C"));
  check_lowering(q, 2);
}

TEST_CASE("storage conversions") {
  const long n = 8;
  auto X = M("X", 12, n), B = M("B", n, n);
  auto s = make("syrk_t_nz", mul({T(X), X}), mul({T(X), X}), "T1");
  auto g = make("gemm_nz", mul({Expr::operand(s.results[0]), B}),
                mul({Expr::operand(s.results[0]), B}), "T2");
  auto p = program({s, g}, {{"Y", g.results[0]}});
  auto l = lower(p);
  REQUIRE(l.plan.conversions.size() == 1);
  CHECK(l.plan.conversions[0].from == SF::lower_triangular_half);
  CHECK(l.plan.conversions[0].to == SF::full);
  CHECK(l.plan.conversions[0].before == 1);
  check_lowering(p, 3);

  // trsm after trsm on the same factor
  auto S = M("S", n, n, close({P::spd}, n, n));
  auto ch = factor("cholesky", S.op());
  auto L = Expr::operand(ch.results[0]);
  auto t1 = make("trsm_left", mul({I(L), B}), mul({I(L), B}), "T1");
  auto t1e = Expr::operand(t1.results[0]);
  auto t2 = make("trsm_left", mul({I(T(L)), t1e}), mul({I(T(L)), t1e}), "T2");
  auto q = program({ch, t1, t2}, {{"Z", t2.results[0]}});
  auto lq = lower(q);
  CHECK(lq.plan.conversions.empty());
  CHECK(lq.plan.in_place.at(0));
  check_lowering(q, 4);

  // triangular output ends in full storage
  auto Lt = M("L", n, n, close({P::lower_triangular, P::non_singular}, n, n));
  auto inv = make("inv_tri", I(Lt), I(Lt), "T1");
  auto r = program({inv}, {{"W", inv.results[0]}});
  auto lr = lower(r);
  REQUIRE(lr.plan.conversions.size() == 1);
  CHECK(lr.plan.conversions[0].before == 1);
  CHECK(lr.plan.conversions[0].to == SF::full);
  check_lowering(r, 5);
  CHECK(emit(lr, EmitFormat::pseudocode).find("convert(T1, lower_half -> full)") !=
        std::string::npos);
}

TEST_CASE("audit finds reads after overwrite") {
  const long n = 6;
  auto A = M("A", n, n), B = M("B", n, n), C = M("C", n, n), D = M("D", n, n);
  auto g = make("gemm", add({mul({A, B}), C}), add({mul({A, B}), C}), "T1");
  auto h = make("gemm_nz", mul({C, D}), mul({C, D}), "T2");
  auto q = program({g, h}, {{"X", g.results[0]}, {"Y", h.results[0]}});
  auto l = lower(q);
  REQUIRE(audit(l).empty());
  // drop the copy: C is read after it was overwritten
  l.plan.copies.clear();
  l.plan.buffer["T1"] = l.plan.buffer["C"];
  l.steps.erase(std::remove_if(l.steps.begin(), l.steps.end(),
                               [](const Step& s) { return s.kind == StepKind::copy; }),
                l.steps.end());
  CHECK_FALSE(audit(l).empty());
  CHECK_THROWS_AS(execute_lowered(l, instantiate(q.inputs, 1)), InterpreterError);
}

TEST_CASE("emission") {
  Program empty;
  auto le = lower(empty);
  CHECK(emit(le, EmitFormat::listing_text).empty());
  CHECK(emit(le, EmitFormat::pseudocode).empty());
  CHECK(emit(parse_listing_json(emit(le, EmitFormat::listing_json)), EmitFormat::listing_json) ==
        emit(le, EmitFormat::listing_json));

  auto A = M("A", 30, 20), B = M("B", 20, 10);
  auto g = make("gemm_nz", mul({A, B}), mul({A, B}), "T1");
  auto p = program({g}, {{"C", g.results[0]}});
  auto text = emit(lower(p), EmitFormat::listing_text);
  CHECK(text == "gemm_nz(A, B) -> T1  # 12000\n");
  CHECK_THROWS_AS(parse_listing_json("{}"), ListingError);
  CHECK_THROWS_AS(parse_listing_json("not json"), ListingError);
}

TEST_CASE("generated programs lower faithfully") {
  {
    auto X = M("X", 60, 20, {P::full_rank}), y = M("y", 60, 1);
    auto prob = problem({X, y}, {{Operand("b", 20, 1), mul({I(mul({T(X), X})), T(X), y})}});
    SearchOptions o;
    o.pruning = false;
    o.max_iterations = 2000;
    auto g = generate(prob, o);
    std::uint64_t seed = 10;
    for (const auto& p : k_best(g, 4)) check_lowering(p, seed++);
  }
  {
    // x := W (A^T (A W A^T)^-1 b - c)
    auto A = M("A", 20, 40, {P::full_rank}), b = M("b", 20, 1), c = M("c", 40, 1);
    auto W = M("W", 40, 40, close({P::diagonal, P::spd}, 40, 40));
    auto rhs = mul({W, add({mul({T(A), I(mul({A, W, T(A)})), b}), mul({lit(-1), c})})});
    auto prob = problem({A, W, b, c}, {{Operand("x", 40, 1), rhs}});
    auto p = k_best(generate(prob), 1).at(0);
    check_lowering(p, 20);
    auto l = lower(p);
    std::vector<std::string> seq;
    for (const auto& s : l.steps) {
      if (s.kind == StepKind::copy) seq.push_back("copy");
      if (s.kind == StepKind::call) seq.push_back(p.calls[s.index].kernel
                                                      ? p.calls[s.index].kernel->family
                                                      : p.calls[s.index].factorization->name);
    }
    const std::vector<std::string> want = {"copy",  "diagscale", "gemm", "cholesky",
                                           "trsv",  "trsv",      "gemv", "diagscale"};
    std::string got;
    for (const auto& s : seq) got += s + " ";
    CAPTURE(got);
    CHECK(seq == want);
  }
  RandomProblemConfig cfg;
  cfg.max_dim = 100;
  SearchOptions o;
  o.max_iterations = 1500;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto prob = random_problem(cfg, seed);
    CAPTURE(prob.assignments[0].rhs.str());
    auto g = generate(prob, o);
    for (const auto& p : k_best(g, 2)) check_lowering(p, seed);
  }
}

TEST_CASE("derivation report") {
  auto A = M("A", 30, 20), B = M("B", 20, 10);
  auto g = generate(problem({A, B}, {{Operand("C", 30, 10), mul({A, B})}}));
  auto paths = k_best_paths(g, 1);
  REQUIRE(paths.size() == 1);
  auto r = derivation_report(g, paths[0]);
  CHECK(std::count(r.begin(), r.end(), '\n') >= 3);
  CHECK(r.find("state 0") != std::string::npos);
  CHECK(r.find("state 1") != std::string::npos);
  CHECK(r.find("state 2") == std::string::npos);
  CHECK(r.find("total cost: 12000\n") != std::string::npos);

  Path bad{{static_cast<int>(g.edges.size()) + 5}, 0};
  CHECK_THROWS_AS(derivation_report(g, bad), std::invalid_argument);
}
