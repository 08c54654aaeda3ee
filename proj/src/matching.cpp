#include "lagen/matching.hpp"

#include <algorithm>
#include <set>

namespace lagen {

ProductSplit split_product(const Expr& t) {
  ProductSplit s;
  bool any_matrix = false;
  for (const auto& c : t.children()) any_matrix = any_matrix || !c.is_scalar();
  for (std::size_t i = 0; i < t.arity(); ++i) {
    const auto& c = t.child(i);
    if (c.is(ExprKind::literal)) {
      s.scalars.push_back(i);
    } else if (any_matrix && c.is_scalar()) {
      s.scalars.push_back(i);
      if (!c.is_leaf()) s.scalars_are_leaves = false;
    } else {
      s.factors.push_back(i);
    }
  }
  return s;
}

namespace {

struct Partial {
  std::vector<Operand> bindings;
  std::vector<Modifier> modifiers;
  std::vector<Expr> coefficients;
};

bool bind_leaf(const PatternLeaf& pl, const Expr& e, Partial& st) {
  if (!e.is_leaf()) return false;
  const Modifier m = modifier_of(e);
  if (!(pl.allowed & static_cast<ModifierMask>(m))) return false;
  auto& slot = st.bindings[static_cast<std::size_t>(pl.var)];
  const Operand& o = e.leaf_operand();
  if (is_inverted(m) && !o.is_scalar() && !implies_invertible(o.properties())) return false;
  if (slot.valid()) {
    if (!(slot == o)) return false;
  } else {
    slot = o;
  }
  st.modifiers.push_back(m);
  return true;
}

Expr coefficient_of(const Expr& t, const std::vector<std::size_t>& scalars) {
  if (scalars.empty()) return Expr::literal(1.0);
  std::vector<Expr> ch;
  for (auto i : scalars) ch.push_back(t.child(i));
  return Expr::times(std::move(ch));
}

// A summand as (coefficient, factors); nullopt if it cannot be matched.
struct SplitSummand {
  Expr coefficient;
  std::vector<Expr> factors;
  bool coefficient_ok = true;
};

SplitSummand split_summand(const Expr& s) {
  SplitSummand out{Expr::literal(1.0), {}, true};
  if (s.is(ExprKind::times)) {
    auto sp = split_product(s);
    out.coefficient = coefficient_of(s, sp.scalars);
    out.coefficient_ok = sp.scalars_are_leaves;
    for (auto i : sp.factors) out.factors.push_back(s.child(i));
  } else if (!s.is(ExprKind::literal)) {
    out.factors.push_back(s);
  }
  return out;
}

struct Collector {
  const Pattern& p;
  const Constraint& constraint;
  std::vector<Substitution> out;

  Partial fresh() const {
    Partial st;
    st.bindings.resize(p.variables.size());
    return st;
  }

  void emit(Partial st, Site site, const Expr& node) {
    if (!site.children.empty() && site.children.size() == node.arity()) site.children.clear();
    Substitution s{std::move(st.bindings), std::move(st.modifiers),
                   std::move(st.coefficients), std::move(site)};
    if (constraint && !constraint(s)) return;
    out.push_back(std::move(s));
  }

  void leaf_site(const Expr& leaf, const std::vector<std::size_t>& path) {
    const auto& term = p.terms.front();
    if (term.leaves.size() != 1) return;
    Partial st = fresh();
    if (!bind_leaf(term.leaves[0], leaf, st)) return;
    st.coefficients.push_back(Expr::literal(1.0));
    emit(std::move(st), Site{path, {}}, leaf);
  }

  void product_node(const Expr& t, const std::vector<std::size_t>& path) {
    const auto& term = p.terms.front();
    const std::size_t k = term.leaves.size();
    auto sp = split_product(t);
    if (term.coefficient && !sp.scalars_are_leaves) return;
    const auto& f = sp.factors;
    for (std::size_t start = 0; start + k <= f.size(); ++start) {
      Partial st = fresh();
      bool ok = true;
      for (std::size_t j = 0; j < k && ok; ++j) {
        ok = bind_leaf(term.leaves[j], t.child(f[start + j]), st);
      }
      if (!ok) continue;
      std::vector<std::size_t> sel(f.begin() + static_cast<long>(start),
                                   f.begin() + static_cast<long>(start + k));
      if (term.coefficient) {
        st.coefficients.push_back(coefficient_of(t, sp.scalars));
        sel.insert(sel.end(), sp.scalars.begin(), sp.scalars.end());
      } else {
        st.coefficients.push_back(Expr::literal(1.0));
      }
      std::sort(sel.begin(), sel.end());
      emit(std::move(st), Site{path, std::move(sel)}, t);
    }
  }

  void sum_node(const Expr& plus, const std::vector<std::size_t>& path) {
    const std::size_t nt = p.terms.size();
    if (plus.arity() > 12 && nt > 2) return;
    std::vector<SplitSummand> parts;
    for (const auto& c : plus.children()) parts.push_back(split_summand(c));
    std::vector<std::size_t> chosen;
    std::set<std::string> seen;
    Partial st = fresh();
    recurse(plus, path, parts, chosen, st, seen);
  }

  void recurse(const Expr& plus, const std::vector<std::size_t>& path,
               const std::vector<SplitSummand>& parts, std::vector<std::size_t>& chosen,
               const Partial& st, std::set<std::string>& seen) {
    const std::size_t t = chosen.size();
    if (t == p.terms.size()) {
      std::vector<std::size_t> sel = chosen;
      std::sort(sel.begin(), sel.end());
      Substitution probe{st.bindings, st.modifiers, st.coefficients, Site{path, sel}};
      // Commuted duplicates (X+Y vs Y+X) compute the same value.
      std::string key = normalize(probe.instantiate(p)).key();
      for (auto i : sel) key += "," + std::to_string(i);
      if (!seen.insert(key).second) return;
      emit(st, Site{path, std::move(sel)}, plus);
      return;
    }
    const auto& term = p.terms[t];
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      const auto& part = parts[i];
      if (part.factors.size() != term.leaves.size()) continue;
      if (term.coefficient) {
        if (!part.coefficient_ok) continue;
      } else if (nontrivial_coefficient(part.coefficient)) {
        continue;
      }
      Partial next = st;
      bool ok = true;
      for (std::size_t j = 0; j < term.leaves.size() && ok; ++j) {
        ok = bind_leaf(term.leaves[j], part.factors[j], next);
      }
      if (!ok) continue;
      next.coefficients.push_back(term.coefficient ? part.coefficient : Expr::literal(1.0));
      chosen.push_back(i);
      recurse(plus, path, parts, chosen, next, seen);
      chosen.pop_back();
    }
  }

  void walk(const Expr& e, std::vector<std::size_t>& path, const Expr* parent) {
    const bool product = p.shape == Pattern::Shape::product;
    if (e.is_leaf()) {
      const bool wrapped = parent && (parent->is(ExprKind::transpose) ||
                                      parent->is(ExprKind::inverse)) &&
                           parent->is_leaf();
      const bool in_times = parent && parent->is(ExprKind::times);
      if (product && !wrapped && !in_times) leaf_site(e, path);
      if (e.is(ExprKind::operand)) return;
    }
    if (product && e.is(ExprKind::times)) product_node(e, path);
    if (!product && e.is(ExprKind::plus)) sum_node(e, path);
    for (std::size_t i = 0; i < e.arity(); ++i) {
      path.push_back(i);
      walk(e.child(i), path, &e);
      path.pop_back();
    }
  }
};

int compare_subs(const Substitution& a, const Substitution& b) {
  if (a.site != b.site) return a.site < b.site ? -1 : 1;
  const std::size_t n = std::min(a.bindings.size(), b.bindings.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto c = compare(Expr::operand(a.bindings[i]), Expr::operand(b.bindings[i]));
    if (c != 0) return c < 0 ? -1 : 1;
  }
  if (a.modifiers != b.modifiers) return a.modifiers < b.modifiers ? -1 : 1;
  return 0;
}

}  // namespace

std::vector<Substitution> match(const Pattern& p, const Expr& subject,
                                const Constraint& constraint) {
  Collector col{p, constraint, {}};
  std::vector<std::size_t> path;
  col.walk(subject, path, nullptr);
  std::stable_sort(col.out.begin(), col.out.end(),
                   [](const Substitution& a, const Substitution& b) {
                     return compare_subs(a, b) < 0;
                   });
  return col.out;
}

std::vector<Substitution> match(const Kernel& k, const Expr& subject) {
  return match(k.pattern, subject, k.constraint);
}

std::vector<KernelMatch> match_all(const std::vector<Kernel>& ks, const Expr& subject) {
  std::vector<KernelMatch> out;
  for (const auto& k : ks) {
    for (auto& s : match(k, subject)) out.push_back(KernelMatch{&k, std::move(s)});
  }
  return out;
}

}  // namespace lagen
