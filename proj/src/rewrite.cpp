#include "lagen/rewrite.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "lagen/matching.hpp"

namespace lagen {

std::string_view to_string(RewriteKind k) {
  switch (k) {
    case RewriteKind::normal_form: return "normal_form";
    case RewriteKind::product_of_sums: return "product_of_sums";
    case RewriteKind::inverse_push_up: return "inverse_push_up";
    case RewriteKind::cse_replacement: return "cse_replacement";
    case RewriteKind::special_rule: return "special_rule";
    case RewriteKind::factorization: return "factorization";
  }
  return "?";
}

namespace {

Expr map_children(const Expr& e, const std::function<Expr(const Expr&)>& fn) {
  switch (e.kind()) {
    case ExprKind::transpose: return Expr::transpose(fn(e.child()));
    case ExprKind::inverse: return Expr::inverse(fn(e.child()));
    case ExprKind::times:
    case ExprKind::plus: {
      std::vector<Expr> ch;
      for (const auto& c : e.children()) ch.push_back(fn(c));
      return e.is(ExprKind::times) ? Expr::times(std::move(ch)) : Expr::plus(std::move(ch));
    }
    default: return e;
  }
}

Expr group_terms(const std::vector<Expr>& terms);

// One pass of common factor extraction on a given side.
std::optional<Expr> extract(const std::vector<Expr>& terms, bool left) {
  std::vector<Term> split;
  std::map<std::string, std::pair<int, Expr>> count;
  for (const auto& t : terms) {
    split.push_back(split_term(t));
    const auto& f = split.back().factors;
    if (f.size() < 2 || t.is_scalar()) continue;
    const Expr& x = left ? f.front() : f.back();
    auto& c = count.try_emplace(x.key(), 0, x).first->second;
    ++c.first;
  }
  const Expr* best = nullptr;
  int best_n = 1;
  for (const auto& [k, c] : count) {
    if (c.first < 2) continue;
    if (c.first > best_n || (c.first == best_n && compare(c.second, *best) < 0)) {
      best_n = c.first;
      best = &c.second;
    }
  }
  if (!best) return std::nullopt;
  std::vector<Expr> inner, rest;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    auto& s = split[i];
    const bool hit = s.factors.size() >= 2 && !terms[i].is_scalar() &&
                     (left ? s.factors.front() : s.factors.back()) == *best;
    if (!hit) {
      rest.push_back(terms[i]);
      continue;
    }
    if (left) {
      s.factors.erase(s.factors.begin());
    } else {
      s.factors.pop_back();
    }
    const long r = s.factors.front().rows();
    const long c = s.factors.back().cols();
    inner.push_back(build_term(s, r, c));
  }
  Expr in = group_terms(inner);
  Expr grouped = left ? Expr::times({*best, in}) : Expr::times({in, *best});
  if (rest.empty()) return grouped;
  return Expr::plus({grouped, group_terms(rest)});
}

Expr group_terms(const std::vector<Expr>& terms) {
  if (terms.size() == 1) return terms.front();
  if (auto l = extract(terms, true)) return *l;
  if (auto r = extract(terms, false)) return *r;
  return Expr::plus(terms);
}

Expr pos(const Expr& e) {
  if (e.is(ExprKind::plus)) {
    std::vector<Expr> terms;
    for (const auto& c : e.children()) terms.push_back(map_children(c, pos));
    return group_terms(terms);
  }
  return map_children(e, pos);
}

Expr uninvert(const Expr& leaf) {
  Expr base = Expr::operand(leaf.leaf_operand());
  return leaf.leaf_transposed() ? Expr::transpose(base) : base;
}

Expr push_up(const Expr& e) {
  Expr m = map_children(e, push_up);
  if (!m.is(ExprKind::times)) return m;
  std::vector<Expr> out;
  const auto& ch = m.children();
  for (std::size_t i = 0; i < ch.size();) {
    std::size_t j = i;
    while (j < ch.size() && ch[j].is_leaf() && ch[j].leaf_inverted() && !ch[j].is_scalar()) ++j;
    if (j - i >= 2) {
      std::vector<Expr> inner;
      for (std::size_t k = j; k-- > i;) inner.push_back(uninvert(ch[k]));
      out.push_back(Expr::inverse(Expr::times(std::move(inner))));
      i = j;
    } else {
      out.push_back(ch[i]);
      ++i;
    }
  }
  return Expr::times(std::move(out));
}

}  // namespace

Expr product_of_sums(const Expr& e) { return pos(e); }

Expr push_inverse_up(const Expr& e) { return push_up(e); }

std::vector<Expr> representations(const Expr& e) {
  std::vector<Expr> out;
  for (const auto& r : {product_of_sums(e), push_inverse_up(e), e}) {
    if (std::none_of(out.begin(), out.end(), [&](const Expr& o) { return o == r; })) {
      out.push_back(r);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// common subexpressions

namespace {

struct Occ {
  Site site;
  std::size_t first, last;  // child index range
  Expr norm;
};

void collect_runs(const Expr& e, std::vector<std::size_t>& path, std::vector<Occ>& out) {
  if (e.is(ExprKind::times) && !e.is_scalar()) {
    std::vector<std::size_t> f;
    for (std::size_t i = 0; i < e.arity(); ++i) {
      if (!e.child(i).is_scalar()) f.push_back(i);
    }
    for (std::size_t a = 0; a < f.size(); ++a) {
      for (std::size_t b = a + 1; b < f.size(); ++b) {
        Site s{path, {}};
        std::vector<Expr> run;
        for (std::size_t k = a; k <= b; ++k) {
          s.children.push_back(f[k]);
          run.push_back(e.child(f[k]));
        }
        if (s.children.size() == e.arity()) s.children.clear();
        out.push_back({s, f[a], f[b], normalize(Expr::times(std::move(run)))});
      }
    }
  }
  for (std::size_t i = 0; i < e.arity(); ++i) {
    path.push_back(i);
    collect_runs(e.child(i), path, out);
    path.pop_back();
  }
}

bool overlaps(const Occ& a, const Occ& b) {
  auto inside = [](const Occ& outer, const Occ& inner) {
    // inner sits below one of outer's selected children, or in the same node
    if (inner.site.path.size() < outer.site.path.size()) return false;
    if (!std::equal(outer.site.path.begin(), outer.site.path.end(), inner.site.path.begin())) {
      return false;
    }
    if (inner.site.path.size() == outer.site.path.size()) {
      return inner.first <= outer.last && outer.first <= inner.last;
    }
    const std::size_t c = inner.site.path[outer.site.path.size()];
    return c >= outer.first && c <= outer.last;
  };
  return inside(a, b) || inside(b, a);
}

Expr min_key(const Expr& a, const Expr& b) { return compare(a, b) <= 0 ? a : b; }

}  // namespace

std::vector<CommonSubexpression> common_subexpressions(const Expr& e) {
  std::vector<Occ> occ;
  std::vector<std::size_t> path;
  collect_runs(e, path, occ);

  struct Group {
    Expr canon;
    std::vector<std::pair<std::size_t, Modifier>> members;
  };
  std::vector<Group> groups;
  std::unordered_map<std::string, std::size_t> by_key;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    const Expr& n = occ[i].norm;
    if (n.is_leaf() || n.is(ExprKind::literal)) continue;
    const Expr t = transpose_of(n);
    const Expr canon = min_key(n, t);
    const Modifier m = canon == n ? Modifier::none : Modifier::transpose;
    auto [it, fresh] = by_key.emplace(canon.key(), groups.size());
    if (fresh) groups.push_back({canon, {}});
    groups[it->second].members.push_back({i, m});
  }
  // inverse occurrences join the group of the uninverted subexpression
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& grp = groups[g];
    if (grp.members.empty() || !grp.canon.is_square()) continue;
    Expr inv;
    try {
      inv = inverse_of(grp.canon);
    } catch (const MalformedExpression&) {
      continue;
    }
    const Expr canon = min_key(inv, transpose_of(inv));
    auto it = by_key.find(canon.key());
    if (it == by_key.end() || it->second == g) continue;
    auto& other = groups[it->second];
    // keep the group whose representative has fewer inverses
    auto inverses = [](const Expr& x) {
      std::size_t n = 0;
      std::function<void(const Expr&)> walk = [&](const Expr& y) {
        if (y.is(ExprKind::inverse)) ++n;
        for (const auto& c : y.children()) walk(c);
      };
      walk(x);
      return n;
    };
    Group* keep = &grp;
    Group* drop = &other;
    if (inverses(other.canon) < inverses(grp.canon) ||
        (inverses(other.canon) == inverses(grp.canon) && compare(other.canon, grp.canon) < 0)) {
      std::swap(keep, drop);
    }
    for (auto [i, m] : drop->members) {
      const Expr& n = occ[i].norm;
      Modifier mm = Modifier::inverse;
      if (n == transpose_of(inverse_of(keep->canon))) mm = Modifier::inverse_transpose;
      keep->members.push_back({i, mm});
    }
    drop->members.clear();
  }

  std::vector<CommonSubexpression> out;
  for (auto& g : groups) {
    std::sort(g.members.begin(), g.members.end(), [&](const auto& a, const auto& b) {
      const auto& x = occ[a.first];
      const auto& y = occ[b.first];
      if (x.site.path != y.site.path) return x.site.path < y.site.path;
      return x.first < y.first;
    });
    CommonSubexpression c{g.canon, {}};
    std::vector<std::size_t> taken;
    for (auto [i, m] : g.members) {
      if (std::any_of(taken.begin(), taken.end(),
                      [&](std::size_t j) { return overlaps(occ[i], occ[j]); })) {
        continue;
      }
      taken.push_back(i);
      c.occurrences.push_back({occ[i].site, m});
    }
    if (c.occurrences.size() >= 2) out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.occurrences.size() != b.occurrences.size()) {
      return a.occurrences.size() > b.occurrences.size();
    }
    const auto na = operand_count(a.expr), nb = operand_count(b.expr);
    if (na != nb) return na > nb;
    return compare(a.expr, b.expr) < 0;
  });
  return out;
}

Expr replace_occurrences(const Expr& e, const CommonSubexpression& cse, const Operand& with) {
  auto occ = cse.occurrences;
  // later sites first so earlier indices stay valid
  std::sort(occ.begin(), occ.end(), [](const auto& a, const auto& b) {
    if (a.site.path != b.site.path) return a.site.path > b.site.path;
    return a.site.children > b.site.children;
  });
  Expr out = e;
  for (const auto& o : occ) out = replace_site(out, o.site, apply_modifier(with, o.modifier));
  return normalize(out);
}

// ---------------------------------------------------------------------------
// special rules

namespace {

struct Pair {
  Expr left, right;  // two leaf factors of a coefficient-free term
};

std::optional<Pair> as_pair(const Expr& t) {
  if (!t.is(ExprKind::times) || t.arity() != 2) return std::nullopt;
  const auto& a = t.child(0);
  const auto& b = t.child(1);
  if (!a.is_leaf() || !b.is_leaf() || a.leaf_inverted() || b.leaf_inverted()) return std::nullopt;
  if (a.is_scalar() || b.is_scalar()) return std::nullopt;
  return Pair{a, b};
}

Expr T(const Operand& o) { return Expr::transpose(Expr::operand(o)); }
Expr P(const Operand& o) { return Expr::operand(o); }

// A^T A + A^T B + B^T A, or its transpose A A^T + A B^T + B A^T.
std::vector<Rewrite> half_shift(const Expr& e, bool transposed) {
  std::vector<Rewrite> out;
  if (!e.is(ExprKind::plus)) return out;
  const auto& ch = e.children();
  auto find = [&](const Expr& want) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < ch.size(); ++i) {
      if (ch[i] == want) return i;
    }
    return std::nullopt;
  };
  for (std::size_t i = 0; i < ch.size(); ++i) {
    auto sq = as_pair(ch[i]);
    if (!sq || sq->left.leaf_operand() != sq->right.leaf_operand()) continue;
    const Operand a = sq->left.leaf_operand();
    if (a.has(Property::symmetric)) continue;
    const bool ok = transposed ? (!sq->left.leaf_transposed() && sq->right.leaf_transposed())
                               : (sq->left.leaf_transposed() && !sq->right.leaf_transposed());
    if (!ok) continue;
    for (std::size_t j = 0; j < ch.size(); ++j) {
      if (j == i) continue;
      auto ab = as_pair(ch[j]);
      if (!ab) continue;
      Operand b;
      if (!transposed) {
        if (!(ab->left == T(a)) || ab->right.leaf_transposed()) continue;
        b = ab->right.leaf_operand();
      } else {
        if (!(ab->left == P(a)) || !ab->right.leaf_transposed()) continue;
        b = ab->right.leaf_operand();
      }
      if (b == a || b.rows() != a.rows() || b.cols() != a.cols()) continue;
      const Expr third = transposed ? Expr::times({P(b), T(a)}) : Expr::times({T(b), P(a)});
      auto k = find(third);
      if (!k || *k == i || *k == j) continue;
      Operand y("$Y", a.rows(), a.cols());
      std::vector<Expr> rest;
      for (std::size_t m = 0; m < ch.size(); ++m) {
        if (m != i && m != j && m != *k) rest.push_back(ch[m]);
      }
      if (transposed) {
        rest.push_back(Expr::times({P(a), T(y)}));
        rest.push_back(Expr::times({P(y), T(a)}));
      } else {
        rest.push_back(Expr::times({T(a), P(y)}));
        rest.push_back(Expr::times({T(y), P(a)}));
      }
      Rewrite r{RewriteKind::special_rule, e, Expr::plus(std::move(rest)), {}, {}};
      r.assignments.push_back({y, Expr::plus({P(b), Expr::times({Expr::literal(0.5), P(a)})})});
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace

const std::vector<SpecialRule>& special_rule_table() {
  static const std::vector<SpecialRule> table = {
      {"half_shift", "A^T A + A^T B + B^T A -> Y := B + A/2; A^T Y + Y^T A",
       [](const Expr& e) { return half_shift(e, false); }},
      {"half_shift_t", "A A^T + A B^T + B A^T -> Y := B + A/2; A Y^T + Y A^T",
       [](const Expr& e) { return half_shift(e, true); }},
  };
  return table;
}

std::vector<Rewrite> special_rules(const Expr& e) {
  std::vector<Rewrite> out;
  std::function<void(const Expr&)> walk = [&](const Expr& x) {
    for (const auto& rule : special_rule_table()) {
      for (auto& r : rule.apply(x)) {
        r.before = e;
        // lift the rewritten node back into the whole expression
        if (!(x == e)) {
          std::function<Expr(const Expr&)> lift = [&](const Expr& y) -> Expr {
            if (y == x) return r.after;
            return map_children(y, lift);
          };
          r.after = lift(e);
        }
        out.push_back(std::move(r));
      }
    }
    for (const auto& c : x.children()) walk(c);
  };
  walk(e);
  return out;
}

// ---------------------------------------------------------------------------
// factorizations

std::vector<Operand> factor_operands(const Factorization& f, const Operand& target,
                                     const std::vector<std::string>& names) {
  std::vector<Operand> out;
  auto outs = f.outputs(target);
  for (std::size_t i = 0; i < outs.size(); ++i) {
    out.emplace_back(names.at(i), outs[i].rows, outs[i].cols, outs[i].properties,
                     Origin::factorization_output);
  }
  return out;
}

Rewrite apply_factorization(const Expr& e, const Operand& target, const Factorization& f,
                            const FactorNamer& namer) {
  if (target.is_factor()) {
    throw PreconditionError("factorization of factor operand " + target.name());
  }
  if (!occurs_inside_inverse(e, target.name())) {
    throw PreconditionError(target.name() + " does not occur inside an inverse");
  }
  if (!f.applicable(target)) {
    throw PreconditionError(f.name + " does not apply to " + target.name());
  }
  std::vector<Operand> ops;
  if (namer) {
    ops = namer(f, target);
  } else {
    std::vector<std::string> names;
    for (const auto& o : f.outputs(target)) names.push_back(o.role + "_" + target.name());
    ops = factor_operands(f, target, names);
  }
  const Expr product = f.product(ops);
  KernelCall call;
  call.factorization = &f;
  call.target = target;
  call.results = ops;
  call.value = product;
  call.flops = cost(f, f.dims(target));
  Rewrite r{RewriteKind::factorization, e, normalize(substitute(e, {{target.name(), product}})),
            {call}, {}};
  return r;
}

}  // namespace lagen
