#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "lagen/kerneldb.hpp"

using namespace th;
using P = lagen::Property;

namespace {

// Textbook right-looking Cholesky, counting every arithmetic operation.
double count_cholesky(int n) {
  double f = 0;
  for (int j = 0; j < n; ++j) {
    f += 2.0 * j + 1;  // l_jj = sqrt(a_jj - sum l_jk^2): j mults, j subs, 1 sqrt
    for (int i = j + 1; i < n; ++i) f += 2.0 * j + 1;  // j mults, j subs, 1 div
  }
  return f;
}

double count_trsv(int n) {
  double f = 0;
  for (int i = 0; i < n; ++i) f += 2.0 * i + 1;
  return f;
}

double count_lu(int n) {
  double f = 0;
  for (int k = 0; k < n; ++k) {
    f += n - k - 1;                          // multipliers
    f += 2.0 * (n - k - 1) * (n - k - 1);  // update
  }
  return f;
}

}  // namespace

TEST_CASE("catalogue contents") {
  for (const char* name : {"gemm", "gemm_nz", "gemv", "ger", "syrk_t", "syrk_n", "trmm_left",
                           "trsm_left", "trsm_right", "trsv", "add", "scal", "dot",
                           "diag_left", "diag_right", "transpose", "inv"}) {
    CHECK_MESSAGE(find_kernel(name) != nullptr, name);
  }
  const auto* g = find_kernel("gemm");
  CHECK(g->pattern.shape == Pattern::Shape::sum);
  CHECK(g->pattern.str() == "alpha op(X) op(Y) + beta Z");
  CHECK(find_kernel("trsv")->pattern.str() == "alpha op(L)^-1 x");
  for (const auto& k : builtin_kernels()) CHECK_FALSE(k.name.empty());
  CHECK(kernel_table().find("trsm_left") != std::string::npos);
}

TEST_CASE("cost formulas") {
  const auto* g = find_kernel("gemm_nz");
  CHECK(cost(*g, Dims{{"m", 1000}, {"n", 1000}, {"k", 1000}, {"alpha", 0}}) == 2e9);
  CHECK_THROWS_AS(cost(*g, Dims{{"m", 1000}, {"n", 1000}, {"alpha", 0}}), BindingError);
  const auto* trsv = find_kernel("trsv");
  CHECK(cost(*trsv, Dims{{"n", 1000}, {"alpha", 0}}) == 1e6);
  const auto* chol = find_factorization("cholesky");
  CHECK(cost(*chol, Dims{{"n", 1000}}) == doctest::Approx(1e9 / 3));
}

TEST_CASE("leading coefficients agree with counting oracles") {
  // fit c in count ~ c n^3 from two sizes
  auto fit = [](double (*count)(int)) {
    const double a = count(200), b = count(400);
    return (b - a) / (400.0 * 400 * 400 - 200.0 * 200 * 200);
  };
  CHECK(fit(count_cholesky) == doctest::Approx(1.0 / 3).epsilon(0.02));
  CHECK(fit(count_lu) == doctest::Approx(2.0 / 3).epsilon(0.02));
  for (int n : {1, 5, 37}) CHECK(count_trsv(n) == cost(*find_kernel("trsv"), Dims{{"n", n}, {"alpha", 0}}));
}

TEST_CASE("costs are positive and dimension monotone") {
  for (const auto& k : builtin_kernels()) {
    Dims d;
    for (const auto& name : k.cost.dims) d[name] = (name == "alpha" || name == "beta") ? 1 : 7;
    const double c1 = cost(k, d);
    for (auto& [name, v] : d) {
      if (name != "alpha" && name != "beta") v *= 2;
    }
    CHECK_MESSAGE(c1 > 0, k.name);
    CHECK_MESSAGE(cost(k, d) >= c1, k.name);
  }
}

TEST_CASE("factorization candidates") {
  Operand spd("S", 5, 5, {P::spd});
  auto fs = factorizations_for(spd);
  REQUIRE_FALSE(fs.empty());
  CHECK(fs.front()->kind == FactorizationKind::cholesky);
  for (auto* f : fs) CHECK(f->kind != FactorizationKind::lu);

  Operand a("A", 5, 5, {P::full_rank});
  bool has_lu = false;
  for (auto* f : factorizations_for(a)) has_lu = has_lu || f->kind == FactorizationKind::lu;
  CHECK(has_lu);

  CHECK(factorizations_for(Operand("L", 5, 5, {P::lower_triangular, P::non_singular})).empty());
  CHECK(factorizations_for(Operand("D", 5, 5, {P::diagonal, P::non_singular})).empty());
  CHECK(factorizations_for(Operand("Q", 5, 5, {P::orthogonal})).empty());
  CHECK(factorizations_for(Operand("F", 5, 5, {P::spd}, Origin::factorization_output)).empty());

  Operand x("X", 9, 4, {P::full_rank});
  auto fx = factorizations_for(x);
  REQUIRE_FALSE(fx.empty());
  CHECK(fx.front()->kind == FactorizationKind::qr);
}

TEST_CASE("factor outputs reproduce the target's shape") {
  Operand x("X", 9, 4, {P::full_rank});
  for (const auto* f : factorizations_for(x)) {
    std::vector<Operand> ops;
    int i = 0;
    for (const auto& o : f->outputs(x)) {
      ops.emplace_back(o.role + std::to_string(i++), o.rows, o.cols, o.properties,
                       Origin::factorization_output);
    }
    auto e = f->product(ops);
    CHECK(e.rows() == 9);
    CHECK(e.cols() == 4);
    for (const auto& o : ops) CHECK(o.is_factor());
  }
}
