#include <algorithm>

#include "doctest.h"
#include "helpers.hpp"
#include "lagen/rewrite.hpp"
#include "lagen/verify.hpp"

using namespace th;
using P = lagen::Property;

namespace {

bool contains(const std::vector<Expr>& v, const Expr& e) {
  return std::any_of(v.begin(), v.end(), [&](const Expr& x) { return x == e; });
}

std::vector<std::size_t> counts(const std::vector<CommonSubexpression>& cs) {
  std::vector<std::size_t> out;
  for (const auto& c : cs) out.push_back(c.occurrences.size());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("representations") {
  auto A = M("A", 5, 5), B = M("B", 5, 5), C = M("C", 5, 5);
  auto r = representations(normalize(add({mul({A, B}), mul({A, C})})));
  CHECK(contains(r, mul({A, add({B, C})})));

  auto An = M("A", 5, 5, {P::non_singular}), Bn = M("B", 5, 5, {P::non_singular});
  auto inv = representations(normalize(mul({I(Bn), I(An)})));
  CHECK(contains(inv, I(mul({An, Bn}))));

  auto single = representations(A);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == A);
}

TEST_CASE("product of sums on the restoration body") {
  const long m = 10, n = 30;
  auto Hd = M("Hd", n, m, {P::full_rank}), H = M("H", m, n, {P::full_rank});
  auto y = M("y", m, 1), x = M("x", n, 1);
  auto In = Expr::operand(Operand("I_n", n, n, {P::identity}));
  auto e = normalize(add({mul({Hd, y}), mul({add({In, mul({lit(-1), Hd, H})}), x})}));
  auto pos = product_of_sums(e);
  CHECK(equivalent(pos, e));
  // Hd (y - H x) + x
  CHECK_MESSAGE(pos == add({mul({Hd, add({mul({lit(-1), H, x}), y})}), x}), pos.str());
}

TEST_CASE("representations are equivalent and bounded") {
  std::mt19937 rng(11);
  for (int i = 0; i < 300; ++i) {
    auto e = normalize(random_expr(rng, 4));
    auto rs = representations(e);
    CHECK(rs.size() <= 3);
    CHECK(contains(rs, e));
    for (const auto& r : rs) CHECK_MESSAGE(equivalent(r, e), r.str(), " vs ", e.str());
  }
}

TEST_CASE("cse modulo transposition") {
  auto A = M("A", 6, 6, {P::non_singular}), B = M("B", 6, 6);
  auto e = normalize(add({mul({I(A), B}), mul({T(B), I(T(A))})}));
  auto cs = common_subexpressions(e);
  REQUIRE(cs.size() == 1);
  REQUIRE(cs[0].occurrences.size() == 2);
  CHECK(cs[0].occurrences[0].modifier != cs[0].occurrences[1].modifier);
  const bool same = equivalent(cs[0].expr, mul({I(A), B})) ||
                    equivalent(cs[0].expr, mul({T(B), T(I(A))}));
  CHECK(same);

  auto C = M("C", 6, 6);
  CHECK(common_subexpressions(normalize(add({mul({A, B}), mul({C, B, A})}))).empty());
  CHECK(common_subexpressions(A).empty());
}

TEST_CASE("cse on the stochastic newton body") {
  const long l = 25, n = 40, m = 200;
  auto W = M("W", m, l, {P::full_rank}), A = M("A", m, n, {P::full_rank});
  auto B = M("B", n, n, {P::spd});
  auto In = Expr::operand(Operand("I_n", n, n, {P::identity}));
  auto Il = Expr::operand(Operand("I_l", l, l, {P::identity}));
  auto inner = add({mul({lit(4), Il}), mul({T(W), A, B, T(A), W})});
  auto body = mul({lit(1.25), B,
                   add({In, mul({lit(-1), T(A), W, I(inner), T(W), A, B})})});
  auto e = normalize(body);
  auto cs = common_subexpressions(e);
  REQUIRE_FALSE(cs.empty());
  const auto wa = normalize(mul({T(W), A}));
  auto it = std::find_if(cs.begin(), cs.end(), [&](const CommonSubexpression& c) {
    return c.expr == wa || c.expr == transpose_of(wa);
  });
  REQUIRE(it != cs.end());
  CHECK(it->occurrences.size() == 4);
  CHECK(it == cs.begin());

  Operand t("T", it->expr.rows(), it->expr.cols());
  auto replaced = replace_occurrences(e, *it, t);
  CHECK_FALSE(contains_operand(replaced, "W"));
  CHECK(equivalent(substitute(replaced, {{"T", it->expr}}), e));
}

TEST_CASE("cse counts are invariant under transposition") {
  std::mt19937 rng(5);
  for (int i = 0; i < 200; ++i) {
    auto e = normalize(random_expr(rng, 4));
    CHECK(counts(common_subexpressions(e)) == counts(common_subexpressions(transpose_of(e))));
  }
}

TEST_CASE("special rules") {
  const long m = 7, n = 4;
  auto A = M("A", m, n), B = M("B", m, n);
  auto e = normalize(add({mul({T(A), A}), mul({T(A), B}), mul({T(B), A})}));
  auto rs = special_rules(e);
  REQUIRE(rs.size() == 1);
  REQUIRE(rs[0].assignments.size() == 1);
  const auto& y = rs[0].assignments[0];
  CHECK(equivalent(y.rhs, add({B, mul({lit(0.5), A})})));
  CHECK(equivalent(substitute(rs[0].after, {{y.lhs.name(), y.rhs}}), e));

  auto f = normalize(add({mul({A, T(A)}), mul({A, T(B)}), mul({B, T(A)})}));
  auto rt = special_rules(f);
  REQUIRE(rt.size() == 1);
  const auto& yt = rt[0].assignments[0];
  CHECK(equivalent(substitute(rt[0].after, {{yt.lhs.name(), yt.rhs}}), f));

  CHECK(special_rules(normalize(add({mul({T(A), B}), mul({T(B), A})}))).empty());
  CHECK(special_rule_table().size() == 2);
}

TEST_CASE("factorizations") {
  const long n = 8;
  auto S = M("S", n, n, {P::spd}), Bm = M("B", n, 3);
  auto e = normalize(mul({I(S), Bm}));
  auto r = apply_factorization(e, S.op(), *find_factorization("cholesky"));
  REQUIRE(r.calls.size() == 1);
  CHECK(r.calls[0].is_factorization());
  const Operand& L = r.calls[0].results.at(0);
  CHECK(L.is_factor());
  CHECK(L.has(P::lower_triangular));
  CHECK(r.after == normalize(mul({I(T(Expr::operand(L))), I(Expr::operand(L)), Bm})));
  CHECK(r.calls[0].flops == doctest::Approx(n * n * n / 3.0));

  // (X^T X)^-1 X^T y with X = Q R
  auto X = M("X", 30, n, {P::full_rank}), y = M("y", 30, 1);
  auto ls = normalize(mul({I(mul({T(X), X})), T(X), y}));
  auto q = apply_factorization(ls, X.op(), *find_factorization("qr"));
  const Operand& Q = q.calls[0].results.at(0);
  const Operand& R = q.calls[0].results.at(1);
  CHECK(q.after == normalize(mul({I(Expr::operand(R)), T(Expr::operand(Q)), y})));

  CHECK_THROWS_AS(apply_factorization(q.after, R, *find_factorization("lu")), PreconditionError);
  CHECK_THROWS_AS(apply_factorization(normalize(mul({S, Bm})), S.op(),
                                      *find_factorization("cholesky")),
                  PreconditionError);
}

TEST_CASE("rewrites preserve values numerically") {
  std::mt19937 rng(23);
  const long n = 5;
  std::vector<Operand> ops;
  std::vector<Expr> leaves;
  for (int i = 0; i < 40; ++i) {
    auto e = random_expr(rng, 3, n);
    std::vector<Expr> work{e};
    while (!work.empty()) {
      Expr x = work.back();
      work.pop_back();
      if (x.is(ExprKind::operand)) {
        if (std::none_of(ops.begin(), ops.end(), [&](const Operand& o) { return o == x.op(); })) {
          ops.push_back(x.op());
        }
      }
      for (const auto& c : x.children()) work.push_back(c);
    }
    leaves.push_back(e);
  }
  const auto inst = instantiate(ops, 4);
  for (const auto& raw : leaves) {
    const Expr e = normalize(raw);
    double cond = 1;
    const Matrix want = evaluate(raw, inst.values, &cond);
    if (cond > 1e6) continue;
    const double scale = std::max(1.0, want.cwiseAbs().maxCoeff());
    for (const auto& r : representations(e)) {
      CAPTURE(r.str());
      CHECK((evaluate(r, inst.values) - want).cwiseAbs().maxCoeff() < 1e-8 * scale);
    }
  }

  auto A = M("A", 7, 4), B = M("B", 7, 4);
  auto sr = normalize(add({mul({T(A), A}), mul({T(A), B}), mul({T(B), A})}));
  auto rs = special_rules(sr).at(0);
  auto ab = instantiate({A.op(), B.op()}, 5);
  Values env = ab.values;
  env[rs.assignments[0].lhs.name()] = evaluate(rs.assignments[0].rhs, env);
  const Matrix got = evaluate(rs.after, env), want = evaluate(sr, ab.values);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12 * want.cwiseAbs().maxCoeff());
}
