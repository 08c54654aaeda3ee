#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "lagen/expr.hpp"

namespace lagen {

namespace {

Expr push(const Expr& e, bool tr, bool inv);

Expr make_leaf(const Operand& a, bool tr, bool inv) {
  if (a.has(Property::identity)) return Expr::operand(Operand::identity(a.rows()));
  if (a.has(Property::zero)) {
    if (inv) throw MalformedExpression("inverse of zero operand " + a.name());
    return tr ? Expr::operand(Operand::zero(a.cols(), a.rows()))
              : Expr::operand(Operand::zero(a.rows(), a.cols()));
  }
  if (a.is_scalar()) tr = false;
  if (inv && a.is_square() && a.has(Property::orthogonal)) {
    inv = false;
    tr = !tr;
  }
  if (a.has(Property::symmetric)) tr = false;
  Expr out = Expr::operand(a);
  if (tr) out = Expr::transpose(out);
  if (inv) out = Expr::inverse(out);
  return out;
}

// Canonical inverse of a leaf, or nothing if the leaf is not invertible here.
std::optional<Expr> leaf_inverse(const Expr& leaf) {
  if (!leaf.is_leaf() || !leaf.is_square()) return std::nullopt;
  const auto& a = leaf.leaf_operand();
  if (a.has(Property::zero)) return std::nullopt;
  return make_leaf(a, leaf.leaf_transposed(), !leaf.leaf_inverted());
}

Expr wrap_inverse(const Expr& inner);

Expr push(const Expr& e, bool tr, bool inv) {
  switch (e.kind()) {
    case ExprKind::literal:
      if (inv) {
        if (e.value() == 0.0) throw MalformedExpression("inverse of zero literal");
        return Expr::literal(1.0 / e.value());
      }
      return e;
    case ExprKind::operand:
      return make_leaf(e.op(), tr, inv);
    case ExprKind::transpose:
      return push(e.child(), !tr, inv);
    case ExprKind::inverse:
      return push(e.child(), tr, !inv);
    case ExprKind::times: {
      const auto& ch = e.children();
      if (inv) {
        const bool all_square = std::all_of(ch.begin(), ch.end(), [](const Expr& c) {
          return c.is_scalar() || c.is_square();
        });
        if (!all_square) return wrap_inverse(normalize(push(e, tr, false)));
      }
      // Inversion and transposition both reverse the order; doing both
      // keeps it.
      const bool reverse = tr != inv;
      std::vector<Expr> out;
      out.reserve(ch.size());
      for (std::size_t i = 0; i < ch.size(); ++i) {
        const auto& c = reverse ? ch[ch.size() - 1 - i] : ch[i];
        out.push_back(push(c, tr, inv));
      }
      return Expr::times(std::move(out));
    }
    case ExprKind::plus: {
      if (inv) return wrap_inverse(normalize(push(e, tr, false)));
      std::vector<Expr> out;
      out.reserve(e.arity());
      for (const auto& c : e.children()) out.push_back(push(c, tr, false));
      return Expr::plus(std::move(out));
    }
  }
  return e;
}

// `inner` is in normal form.
Expr wrap_inverse(const Expr& inner) {
  if (inner.is(ExprKind::plus)) return Expr::inverse(inner);
  if (inner.is(ExprKind::times)) {
    Term t = split_term(inner);
    const bool all_square = std::all_of(t.factors.begin(), t.factors.end(),
                                        [](const Expr& f) { return f.is_square(); });
    if (all_square) return push(inner, false, true);
    std::vector<Expr> out;
    if (t.coefficient != 1.0) out.push_back(Expr::literal(1.0 / t.coefficient));
    for (const auto& s : t.scalars) out.push_back(push(s, false, true));
    out.push_back(Expr::inverse(Expr::times(t.factors)));
    return Expr::times(std::move(out));
  }
  return push(inner, false, true);
}

using Factors = std::vector<Expr>;

void expand(const Expr& e, std::vector<Factors>& out) {
  switch (e.kind()) {
    case ExprKind::plus:
      for (const auto& c : e.children()) expand(c, out);
      return;
    case ExprKind::times: {
      std::vector<Factors> acc{Factors{}};
      for (const auto& c : e.children()) {
        std::vector<Factors> part;
        expand(c, part);
        std::vector<Factors> next;
        next.reserve(acc.size() * part.size());
        for (const auto& a : acc) {
          for (const auto& p : part) {
            Factors f = a;
            f.insert(f.end(), p.begin(), p.end());
            next.push_back(std::move(f));
          }
        }
        acc = std::move(next);
      }
      out.insert(out.end(), acc.begin(), acc.end());
      return;
    }
    default:
      out.push_back(Factors{e});
      return;
  }
}

struct SimpleTerm {
  double coefficient = 1.0;
  std::vector<Expr> scalars;
  std::vector<Expr> factors;
  bool zero = false;
};

bool cancel_scalars(std::vector<Expr>& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto inv = leaf_inverse(s[i]);
    if (!inv) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j != i && s[j] == *inv) {
        s.erase(s.begin() + static_cast<long>(std::max(i, j)));
        s.erase(s.begin() + static_cast<long>(std::min(i, j)));
        return true;
      }
    }
  }
  return false;
}

bool cancel_factors(std::vector<Expr>& f) {
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    const Expr& a = f[i];
    const Expr& b = f[i + 1];
    if (auto inv = leaf_inverse(a); inv && *inv == b) {
      f.erase(f.begin() + static_cast<long>(i), f.begin() + static_cast<long>(i) + 2);
      return true;
    }
    // Q^T Q = I for orthonormal columns, Q Q^T = I for orthonormal rows.
    if (a.is_leaf() && b.is_leaf() && !a.leaf_inverted() && !b.leaf_inverted() &&
        a.leaf_operand() == b.leaf_operand() && a.leaf_transposed() != b.leaf_transposed()) {
      const auto& q = a.leaf_operand();
      const bool cols_case = a.leaf_transposed() && q.has(Property::orthogonal_columns);
      const bool rows_case = b.leaf_transposed() && q.has(Property::orthogonal_rows);
      if (cols_case || rows_case) {
        f.erase(f.begin() + static_cast<long>(i), f.begin() + static_cast<long>(i) + 2);
        return true;
      }
    }
  }
  // (P)^-1 next to the factors of P.
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!f[i].is(ExprKind::inverse) || !f[i].child().is(ExprKind::times)) continue;
    const auto& p = f[i].child().children();
    const std::size_t m = p.size();
    if (i + m < f.size() &&
        std::equal(p.begin(), p.end(), f.begin() + static_cast<long>(i) + 1)) {
      f.erase(f.begin() + static_cast<long>(i), f.begin() + static_cast<long>(i + m) + 1);
      return true;
    }
    if (i >= m && std::equal(p.begin(), p.end(), f.begin() + static_cast<long>(i - m))) {
      f.erase(f.begin() + static_cast<long>(i - m), f.begin() + static_cast<long>(i) + 1);
      return true;
    }
  }
  return false;
}

SimpleTerm simplify(const Factors& raw, long rows, long cols) {
  SimpleTerm t;
  const bool scalar_term = rows == 1 && cols == 1;
  bool any_matrix = false;
  for (const auto& f : raw) any_matrix = any_matrix || !f.is_scalar();
  for (const auto& f : raw) {
    if (f.is(ExprKind::literal)) {
      t.coefficient *= f.value();
    } else if (f.is_leaf() && f.leaf_operand().has(Property::zero)) {
      t.zero = true;
    } else if (f.is_scalar() && (any_matrix || scalar_term)) {
      // 1x1 factors commute with everything. A product of only 1x1 factors
      // is fully commutative as well.
      if (any_matrix || scalar_term) {
        t.scalars.push_back(f);
      }
    } else {
      t.factors.push_back(f);
    }
  }
  if (t.coefficient == 0.0) t.zero = true;
  if (t.zero) return t;

  std::sort(t.scalars.begin(), t.scalars.end(),
            [](const Expr& a, const Expr& b) { return compare(a, b) < 0; });
  while (cancel_scalars(t.scalars)) {
  }

  for (;;) {
    std::erase_if(t.factors, [](const Expr& f) {
      return f.is(ExprKind::operand) && f.op().has(Property::identity);
    });
    if (!cancel_factors(t.factors)) break;
  }
  if (t.factors.empty() && !scalar_term) {
    t.factors.push_back(Expr::operand(Operand::identity(rows)));
  }
  return t;
}

Expr assemble(const std::vector<Factors>& terms, long rows, long cols) {
  struct Acc {
    double coefficient;
    Expr stripped;
    SimpleTerm term;
  };
  std::vector<Acc> acc;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& raw : terms) {
    SimpleTerm t = simplify(raw, rows, cols);
    if (t.zero) continue;
    Term bare{1.0, t.scalars, t.factors};
    Expr stripped = build_term(bare, rows, cols);
    auto [it, fresh] = index.emplace(stripped.key(), acc.size());
    if (fresh) {
      acc.push_back(Acc{t.coefficient, stripped, t});
    } else {
      acc[it->second].coefficient += t.coefficient;
    }
  }
  std::erase_if(acc, [](const Acc& a) { return std::abs(a.coefficient) < 1e-14; });
  std::sort(acc.begin(), acc.end(), [](const Acc& a, const Acc& b) {
    auto c = compare(a.stripped, b.stripped);
    if (c != 0) return c < 0;
    return a.coefficient < b.coefficient;
  });
  if (acc.empty()) {
    if (rows == 1 && cols == 1) return Expr::literal(0.0);
    return Expr::operand(Operand::zero(rows, cols));
  }
  std::vector<Expr> out;
  out.reserve(acc.size());
  for (const auto& a : acc) {
    if (a.stripped.is(ExprKind::literal)) {
      out.push_back(Expr::literal(a.coefficient * a.stripped.value()));
      continue;
    }
    Term t{a.coefficient, a.term.scalars, a.term.factors};
    out.push_back(build_term(t, rows, cols));
  }
  if (out.size() == 1) return out.front();
  return Expr::plus(std::move(out));
}

}  // namespace

Expr normalize(const Expr& e) {
  Expr pushed = push(e, false, false);
  std::vector<Factors> terms;
  expand(pushed, terms);
  return assemble(terms, e.rows(), e.cols());
}

bool equivalent(const Expr& a, const Expr& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return normalize(a) == normalize(b);
}

Expr transpose_of(const Expr& e) { return normalize(Expr::transpose(e)); }

Expr inverse_of(const Expr& e) { return normalize(Expr::inverse(e)); }

}  // namespace lagen
