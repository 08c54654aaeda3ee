#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lagen/codegen.hpp"
#include "lagen/dsl.hpp"
#include "lagen/search.hpp"
#include "lagen/verify.hpp"

using namespace lagen;

namespace {

const char* kPinv = R"(m = 1000
n = 5000
Matrix H(m, n) <FullRank>
Matrix Hd(n, m) <FullRank>
IdentityMatrix I_n(n, n)
ColumnVector y(m) <>
ColumnVector y_k(n) <>
ColumnVector x_k(n) <>
Hd = trans(H)*inv(H*trans(H))
y_k = Hd*y + (I_n - Hd*H)*x_k
)";

std::vector<std::filesystem::path> corpus() {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(LAGEN_CORPUS_DIR)) {
    if (e.path().extension() == ".la") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void same_spec(const ProblemSpec& a, const ProblemSpec& b) {
  CHECK(a.sizes == b.sizes);
  REQUIRE(a.declarations.size() == b.declarations.size());
  for (std::size_t i = 0; i < a.declarations.size(); ++i) {
    const auto& x = a.declarations[i];
    const auto& y = b.declarations[i];
    CHECK(x.kind == y.kind);
    CHECK(x.operand.name() == y.operand.name());
    CHECK(x.operand.rows() == y.operand.rows());
    CHECK(x.operand.cols() == y.operand.cols());
    CHECK(x.operand.properties() == y.operand.properties());
    CHECK(x.rows_text == y.rows_text);
    CHECK(x.cols_text == y.cols_text);
  }
  REQUIRE(a.assignments.size() == b.assignments.size());
  for (std::size_t i = 0; i < a.assignments.size(); ++i) {
    CHECK(a.assignments[i].lhs.name() == b.assignments[i].lhs.name());
    CHECK(a.assignments[i].rhs.key() == b.assignments[i].rhs.key());
  }
}

template <class E>
void rejects(const char* text, int line, int column) {
  try {
    parse_problem(text);
    FAIL("accepted: " << std::string(text));
  } catch (const E& e) {
    CHECK(e.line == line);
    CHECK(e.column == column);
  } catch (const std::exception& e) {
    FAIL("wrong error for " << std::string(text) << ": " << std::string(e.what()));
  }
}

}  // namespace

TEST_CASE("pseudo-inverse update input") {
  auto s = parse_problem(kPinv);
  CHECK(s.sizes.size() == 2);
  REQUIRE(s.assignments.size() == 2);
  const auto* H = s.find("H");
  REQUIRE(H);
  CHECK(H->operand.rows() == 1000);
  CHECK(H->operand.cols() == 5000);
  CHECK(H->operand.has(Property::full_rank));
  const auto* I = s.find("I_n");
  REQUIRE(I);
  CHECK(I->kind == DeclKind::identity);
  CHECK(I->operand.has(Property::identity));
  CHECK(I->operand.rows() == 5000);
  CHECK(s.assignments[1].lhs.name() == "y_k");
  CHECK(s.assignments[1].rhs.rows() == 5000);
  CHECK(s.assignments[1].rhs.cols() == 1);
}

TEST_CASE("expressions") {
  auto s = parse_problem(R"(
n = 4
Matrix A(n, n) <>
Matrix B(n, n) <>
Scalar a <Positive>
Matrix X(n, n) <>
X = -A + 3/4*B*a - (A - B)   # trailing comment
)");
  REQUIRE(s.assignments.size() == 1);
  auto A = Expr::operand(s.find("A")->operand);
  auto B = Expr::operand(s.find("B")->operand);
  auto a = Expr::operand(s.find("a")->operand);
  auto want = Expr::plus({Expr::times({Expr::literal(-1), A}),
                          Expr::times({Expr::literal(0.75), B, a}),
                          Expr::times({Expr::literal(-1),
                                       Expr::plus({A, Expr::times({Expr::literal(-1), B})})})});
  CHECK(s.assignments[0].rhs.key() == want.key());
  CHECK(s.find("a")->operand.has(Property::positive));
  CHECK(s.find("a")->operand.is_scalar());

  auto d = parse_problem("Matrix A(2, 2) <>\nMatrix X(2, 2) <>\nX = A/4\n");
  CHECK(d.assignments[0].rhs.key() == Expr::times({Expr::operand(d.find("A")->operand),
                                                   Expr::literal(0.25)})
                                          .key());
}

TEST_CASE("vectors and properties") {
  auto s = parse_problem(R"(
n = 6
Matrix L(n, n) <LowerTriangular, NonSingular>
Matrix S(n, n) <SPD>
RowVector r(n) <>
ColumnVector c(n) <>
Scalar z <>
z = r*inv(L)*S*c
)");
  CHECK(s.find("r")->operand.rows() == 1);
  CHECK(s.find("r")->operand.cols() == 6);
  CHECK(s.find("c")->operand.rows() == 6);
  CHECK(s.find("S")->operand.has(Property::symmetric));
  CHECK(s.find("L")->operand.has(Property::lower_triangular));
  CHECK(s.assignments[0].rhs.is_scalar());
}

TEST_CASE("errors") {
  rejects<UnknownPropertyError>("Matrix A(10,10) <Bogus>", 1, 18);
  rejects<DimensionError>(
      "Matrix H(1000, 5000) <>\nColumnVector x(1000) <>\nColumnVector y(1000) <>\ny = H*x\n", 4,
      6);
  rejects<UndeclaredNameError>("Matrix A(n, 3) <>", 1, 10);
  rejects<UndeclaredNameError>("Matrix A(3, 3) <>\nMatrix X(3, 3) <>\nX = A*B\n", 3, 7);
  rejects<UndeclaredNameError>("Matrix A(3, 3) <>\nY = A\n", 2, 1);
  rejects<InconsistentPropertyError>("Matrix A(3, 3) <Zero, NonSingular>", 1, 8);
  rejects<SyntaxError>("Matrix A(3, 3) <>\nMatrix X(3, 3) <>\nX = A * (A\n", 3, 11);
  rejects<SyntaxError>("Matrix A(3, 3) <>\nMatrix X(3, 3) <>\nX = A / A\n", 3, 9);
  rejects<SyntaxError>("n = 0", 1, 5);
  rejects<SyntaxError>("Matrix A(3, 3) <> $", 1, 19);
  rejects<SyntaxError>("Matrix A(3, 3) <>\nMatrix A(3, 3) <>", 2, 8);
  rejects<DimensionError>("Matrix A(3, 4) <>\nMatrix X(4, 3) <>\nX = inv(A)\n", 3, 5);
  rejects<DimensionError>("Matrix A(3, 4) <>\nMatrix X(3, 3) <>\nX = A\n", 3, 1);
  // distinct classes
  CHECK_THROWS_AS(parse_problem("Matrix A(2,2) <Nope>"), UnknownPropertyError);
  CHECK_THROWS_AS(parse_problem("Matrix A(2,2) <Nope>"), ParseError);
}

TEST_CASE("print round trip") {
  std::vector<std::string> texts = {kPinv};
  for (const auto& f : corpus()) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    texts.push_back(ss.str());
  }
  texts.push_back(
      "Matrix A(3, 3) <>\nScalar s <Positive>\nMatrix X(3, 3) <>\n"
      "X = -(A + 2.5e-3*A)*(-s) - trans(inv(A))/3\n");
  for (const auto& t : texts) {
    auto a = parse_problem(t);
    auto printed = print_problem(a);
    auto b = parse_problem(printed);
    same_spec(a, b);
    CHECK(print_problem(b) == printed);
  }
}

TEST_CASE("corpus parses and rescales") {
  auto files = corpus();
  CHECK(files.size() >= 13);
  for (const auto& f : files) {
    CAPTURE(f.string());
    ProblemSpec s;
    REQUIRE_NOTHROW(s = parse_problem_file(f.string()));
    CHECK(!s.assignments.empty());
    auto d = desk_scale(s);
    for (std::size_t i = 0; i < s.sizes.size(); ++i) {
      CHECK(d.sizes[i].second == std::max(20L, std::lround(s.sizes[i].second / 10.0)));
    }
  }
  auto s = desk_scale(parse_problem(kPinv));
  CHECK(s.find("H")->operand.rows() == 100);
  CHECK(s.find("H")->operand.cols() == 500);
  CHECK_THROWS(parse_problem_file("/nonexistent/problem.la"));
}

TEST_CASE("corpus solves and verifies at desk scale") {
  for (const auto& f : corpus()) {
    CAPTURE(f.string());
    auto s = desk_scale(parse_problem_file(f.string()));
    SearchOptions o;
    o.time_limit = 1;
    auto g = generate(s, o);
    REQUIRE(!g.no_solution);
    CHECK(g.first_solution_seconds < 1.0);
    auto progs = k_best(g, 1);
    REQUIRE(progs.size() == 1);
    auto r = verify(progs[0], s, 7);
    CAPTURE(r.str());
    CHECK(r.status != VerifyStatus::fail);
    auto l = lower(progs[0]);
    for (const auto& m : audit(l)) FAIL_CHECK(m);
  }
}
