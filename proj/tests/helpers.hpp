#pragma once

#include <random>

#include "lagen/expr.hpp"
#include "lagen/infer.hpp"

namespace th {

using namespace lagen;

inline Expr M(const std::string& name, long r, long c, PropertySet p = {}) {
  return Expr::operand(Operand(name, r, c, p));
}
inline Expr T(const Expr& e) { return Expr::transpose(e); }
inline Expr I(const Expr& e) { return Expr::inverse(e); }
inline Expr mul(std::vector<Expr> v) { return Expr::times(std::move(v)); }
inline Expr add(std::vector<Expr> v) { return Expr::plus(std::move(v)); }
inline Expr lit(double v) { return Expr::literal(v); }

// Random well-formed expression over square n x n operands A..F with mixed
// properties.
inline Expr random_expr(std::mt19937& rng, int depth, long n = 4) {
  static const std::vector<Expr> leaves = {
      M("A", n, n, {Property::non_singular}),
      M("B", n, n, {Property::non_singular}),
      M("C", n, n, {Property::spd}),
      M("D", n, n, {Property::diagonal, Property::non_singular}),
      M("L", n, n, {Property::lower_triangular, Property::non_singular}),
      M("Q", n, n, {Property::orthogonal}),
  };
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 0 : 5);
  switch (pick(rng)) {
    case 0:
    case 1: {
      std::uniform_int_distribution<std::size_t> l(0, leaves.size() - 1);
      return leaves[l(rng)];
    }
    case 2:
      return T(random_expr(rng, depth - 1, n));
    case 3:
      return mul({random_expr(rng, depth - 1, n), random_expr(rng, depth - 1, n)});
    case 4:
      return add({random_expr(rng, depth - 1, n), random_expr(rng, depth - 1, n)});
    default: {
      // keep inverses on products of non-singular leaves
      std::uniform_int_distribution<std::size_t> l(0, leaves.size() - 1);
      return I(mul({leaves[l(rng)], leaves[l(rng)]}));
    }
  }
}

}  // namespace th
