#include "lagen/pattern.hpp"

#include <algorithm>
#include <sstream>

namespace lagen {

Modifier modifier_of(const Expr& leaf) {
  const bool t = leaf.leaf_transposed();
  const bool i = leaf.leaf_inverted();
  if (i) return t ? Modifier::inverse_transpose : Modifier::inverse;
  return t ? Modifier::transpose : Modifier::none;
}

bool is_transposed(Modifier m) {
  return m == Modifier::transpose || m == Modifier::inverse_transpose;
}

bool is_inverted(Modifier m) {
  return m == Modifier::inverse || m == Modifier::inverse_transpose;
}

Expr apply_modifier(const Operand& op, Modifier m) {
  Expr e = Expr::operand(op);
  if (is_transposed(m)) e = Expr::transpose(e);
  if (is_inverted(m)) e = Expr::inverse(e);
  return e;
}

std::size_t Pattern::leaf_count() const {
  std::size_t n = 0;
  for (const auto& t : terms) n += t.leaves.size();
  return n;
}

namespace {

std::string leaf_str(const std::string& v, ModifierMask m) {
  switch (m) {
    case kPlain:
      return v;
    case kTransposed:
      return v + "^T";
    case kInverted:
      return v + "^-1";
    case kInvTransposed:
      return v + "^-T";
    case kPlainOrT:
      return "op(" + v + ")";
    case kAnyInverse:
      return "op(" + v + ")^-1";
    default:
      return "op(" + v + ")";
  }
}

}  // namespace

std::string Pattern::str() const {
  static const char* coeff[] = {"alpha", "beta", "gamma"};
  std::ostringstream os;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    if (t) os << " + ";
    if (terms[t].coefficient) os << coeff[std::min<std::size_t>(t, 2)] << ' ';
    for (std::size_t l = 0; l < terms[t].leaves.size(); ++l) {
      if (l) os << ' ';
      const auto& leaf = terms[t].leaves[l];
      os << leaf_str(variables[static_cast<std::size_t>(leaf.var)], leaf.allowed);
    }
  }
  return os.str();
}

std::vector<Expr> Substitution::leaf_exprs(const Pattern& p) const {
  std::vector<Expr> out;
  std::size_t k = 0;
  for (const auto& t : p.terms) {
    for (const auto& l : t.leaves) {
      out.push_back(apply_modifier(bindings[static_cast<std::size_t>(l.var)], modifiers[k++]));
    }
  }
  return out;
}

Expr Substitution::instantiate(const Pattern& p) const {
  auto leaves = leaf_exprs(p);
  std::vector<Expr> summands;
  std::size_t k = 0;
  for (std::size_t t = 0; t < p.terms.size(); ++t) {
    std::vector<Expr> f;
    if (t < coefficients.size() && !(coefficients[t].is(ExprKind::literal) &&
                                     coefficients[t].value() == 1.0)) {
      f.push_back(coefficients[t]);
    }
    for (std::size_t l = 0; l < p.terms[t].leaves.size(); ++l) f.push_back(leaves[k++]);
    summands.push_back(Expr::times(std::move(f)));
  }
  return Expr::plus(std::move(summands));
}

Expr site_expr(const Expr& subject, const Site& site) {
  const Expr* e = &subject;
  for (auto i : site.path) e = &e->child(i);
  if (site.children.empty()) return *e;
  std::vector<Expr> sel;
  for (auto i : site.children) sel.push_back(e->child(i));
  return e->is(ExprKind::plus) ? Expr::plus(std::move(sel)) : Expr::times(std::move(sel));
}

namespace {

Expr rebuild(const Expr& e, ExprKind kind, std::vector<Expr> ch) {
  switch (kind) {
    case ExprKind::transpose:
      return Expr::transpose(ch[0]);
    case ExprKind::inverse:
      return Expr::inverse(ch[0]);
    case ExprKind::times:
      return Expr::times(std::move(ch));
    case ExprKind::plus:
      return Expr::plus(std::move(ch));
    default:
      return e;
  }
}

Expr replace_at(const Expr& e, const Site& site, std::size_t depth, const Expr& with) {
  if (depth < site.path.size()) {
    auto ch = e.children();
    ch[site.path[depth]] = replace_at(ch[site.path[depth]], site, depth + 1, with);
    return rebuild(e, e.kind(), std::move(ch));
  }
  if (site.children.empty()) return with;
  // Products: the replacement takes the place of the first selected
  // non-scalar child, so order is kept. Sums: order does not matter.
  std::size_t anchor = site.children.front();
  if (e.is(ExprKind::times)) {
    for (auto i : site.children) {
      if (!e.child(i).is_scalar() && !e.child(i).is(ExprKind::literal)) {
        anchor = i;
        break;
      }
    }
  }
  std::vector<Expr> out;
  for (std::size_t i = 0; i < e.arity(); ++i) {
    if (i == anchor) {
      out.push_back(with);
    } else if (!std::binary_search(site.children.begin(), site.children.end(), i)) {
      out.push_back(e.child(i));
    }
  }
  if (out.size() == 1) return out.front();
  return rebuild(e, e.kind(), std::move(out));
}

}  // namespace

Expr replace_site(const Expr& subject, const Site& site, const Expr& with) {
  return replace_at(subject, site, 0, with);
}

}  // namespace lagen
