#include "lagen/infer.hpp"

#include <algorithm>

namespace lagen {

namespace {

using P = Property;

bool all_factors(const RuleContext& c, P p) {
  if (c.factor_children.empty()) return false;
  for (std::size_t i = 0; i < c.factor_children.size(); ++i) {
    if (!c.factor(i).has(p)) return false;
  }
  return true;
}

bool all_children(const RuleContext& c, P p) {
  return std::all_of(c.children.begin(), c.children.end(),
                     [p](const PropertySet& s) { return s.has(p); });
}

bool any_child(const RuleContext& c, P p) {
  return std::any_of(c.children.begin(), c.children.end(),
                     [p](const PropertySet& s) { return s.has(p); });
}

bool child_has(const RuleContext& c, P p) { return c.children[0].has(p); }

// Matrix factors f_0..f_{k-1} with f_i = f_{k-1-i}^T, i.e. the product has the
// shape Y^T Y or Y^T M Y.
struct Palindrome {
  bool ok = false;
  bool has_middle = false;
  std::size_t middle = 0;
  std::vector<Expr> right;  // Y
};

Palindrome palindrome(const RuleContext& c) {
  Palindrome out;
  const auto& ch = c.node.children();
  const auto& fi = c.factor_children;
  const std::size_t k = fi.size();
  if (k == 0) return out;
  for (std::size_t i = 0; i < k / 2; ++i) {
    if (!(ch[fi[i]] == transpose_of(ch[fi[k - 1 - i]]))) return out;
  }
  out.ok = true;
  out.has_middle = k % 2 == 1;
  out.middle = fi[k / 2];
  for (std::size_t i = (k + 1) / 2; i < k; ++i) out.right.push_back(ch[fi[i]]);
  return out;
}

bool tall_full_rank(const std::vector<Expr>& y) {
  if (y.empty()) return true;
  Expr prod = Expr::times(y);
  if (prod.rows() < prod.cols()) return false;
  return infer(prod).has(P::full_rank);
}

bool symmetric_product(const RuleContext& c) {
  auto pal = palindrome(c);
  if (!pal.ok) return false;
  return !pal.has_middle || c.children[pal.middle].has(P::symmetric);
}

bool spsd_product(const RuleContext& c) {
  if (!c.scalars_positive) return false;
  auto pal = palindrome(c);
  if (!pal.ok) return false;
  return !pal.has_middle || c.children[pal.middle].has(P::spsd);
}

bool spd_product(const RuleContext& c) {
  if (!c.scalars_positive) return false;
  auto pal = palindrome(c);
  if (!pal.ok) return false;
  if (pal.has_middle && !c.children[pal.middle].has(P::spd)) return false;
  return tall_full_rank(pal.right);
}

std::vector<InferenceRule> build_rules() {
  std::vector<InferenceRule> r;
  auto add = [&](std::string name, ExprKind k, P concl,
                 std::function<bool(const RuleContext&)> prem) {
    r.push_back(InferenceRule{std::move(name), k, concl, std::move(prem)});
  };
  auto keep = [](P p) { return [p](const RuleContext& c) { return child_has(c, p); }; };

  // Transposition.
  add("transpose_lower_to_upper", ExprKind::transpose, P::upper_triangular,
      keep(P::lower_triangular));
  add("transpose_upper_to_lower", ExprKind::transpose, P::lower_triangular,
      keep(P::upper_triangular));
  add("transpose_rows_to_columns", ExprKind::transpose, P::orthogonal_columns,
      keep(P::orthogonal_rows));
  add("transpose_columns_to_rows", ExprKind::transpose, P::orthogonal_rows,
      keep(P::orthogonal_columns));
  for (P p : {P::symmetric, P::diagonal, P::spd, P::spsd, P::orthogonal, P::permutation,
              P::non_singular, P::full_rank, P::identity, P::zero, P::unit_diagonal,
              P::positive}) {
    add("transpose_keeps_" + std::string(to_string(p)), ExprKind::transpose, p, keep(p));
  }

  // Inversion.
  add("inverse_is_non_singular", ExprKind::inverse, P::non_singular,
      [](const RuleContext&) { return true; });
  for (P p : {P::spd, P::lower_triangular, P::upper_triangular, P::diagonal, P::orthogonal,
              P::permutation, P::symmetric, P::identity, P::positive}) {
    add("inverse_keeps_" + std::string(to_string(p)), ExprKind::inverse, p, keep(p));
  }
  add("inverse_keeps_unit_diagonal", ExprKind::inverse, P::unit_diagonal,
      [](const RuleContext& c) {
        return child_has(c, P::unit_diagonal) && c.children[0].is_triangular();
      });

  // Products. Scalars (1x1 factors) commute and only affect definiteness
  // and regularity.
  add("product_diagonal", ExprKind::times, P::diagonal,
      [](const RuleContext& c) { return all_factors(c, P::diagonal); });
  add("product_lower_triangular", ExprKind::times, P::lower_triangular,
      [](const RuleContext& c) { return all_factors(c, P::lower_triangular); });
  add("product_upper_triangular", ExprKind::times, P::upper_triangular,
      [](const RuleContext& c) { return all_factors(c, P::upper_triangular); });
  add("product_permutation", ExprKind::times, P::permutation, [](const RuleContext& c) {
    return c.scalar_children.empty() && all_factors(c, P::permutation);
  });
  add("product_orthogonal", ExprKind::times, P::orthogonal, [](const RuleContext& c) {
    return c.scalar_children.empty() && all_factors(c, P::orthogonal);
  });
  add("product_unit_lower", ExprKind::times, P::unit_diagonal, [](const RuleContext& c) {
    return c.scalar_children.empty() && all_factors(c, P::unit_diagonal) &&
           (all_factors(c, P::lower_triangular) || all_factors(c, P::upper_triangular));
  });
  add("product_non_singular", ExprKind::times, P::non_singular, [](const RuleContext& c) {
    return c.scalars_nonzero && all_factors(c, P::non_singular);
  });
  add("product_full_rank", ExprKind::times, P::full_rank, [](const RuleContext& c) {
    if (!c.scalars_nonzero || !all_factors(c, P::full_rank)) return false;
    std::size_t rectangular = 0;
    for (std::size_t i = 0; i < c.factor_children.size(); ++i) {
      if (!c.factor(i).has(P::non_singular)) ++rectangular;
    }
    return rectangular <= 1;
  });
  add("product_symmetric_palindrome", ExprKind::times, P::symmetric, symmetric_product);
  add("product_spsd_gram", ExprKind::times, P::spsd, spsd_product);
  add("product_spd_gram", ExprKind::times, P::spd, spd_product);
  add("product_zero", ExprKind::times, P::zero,
      [](const RuleContext& c) { return any_child(c, P::zero); });
  add("scalar_product_positive", ExprKind::times, P::positive, [](const RuleContext& c) {
    return c.node.is_scalar() && all_children(c, P::positive);
  });

  // Sums.
  for (P p : {P::symmetric, P::diagonal, P::lower_triangular, P::upper_triangular, P::spsd,
              P::positive}) {
    add("sum_keeps_" + std::string(to_string(p)), ExprKind::plus, p,
        [p](const RuleContext& c) { return all_children(c, p); });
  }
  add("sum_spd_plus_spsd", ExprKind::plus, P::spd, [](const RuleContext& c) {
    return all_children(c, P::spsd) && any_child(c, P::spd);
  });

  // Structural symmetry: A = A^T in normal form. Applies to every compound
  // square node.
  for (ExprKind k : {ExprKind::times, ExprKind::plus, ExprKind::inverse}) {
    add("structurally_symmetric", k, P::symmetric,
        [](const RuleContext& c) { return syntactically_symmetric(c.node); });
  }
  return r;
}

PropertySet literal_properties(double v) {
  PropertySet p;
  if (v > 0) p.insert(P::positive);
  if (v != 0) p.insert(P::non_singular);
  if (v == 0) p.insert(P::zero);
  return p;
}

}  // namespace

const std::vector<InferenceRule>& inference_rules() {
  static const std::vector<InferenceRule> rules = build_rules();
  return rules;
}

bool syntactically_symmetric(const Expr& e) {
  if (!e.is_square()) return false;
  return normalize(e) == transpose_of(e);
}

PropertySet infer(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::literal:
      return close(literal_properties(e.value()), 1, 1);
    case ExprKind::operand:
      return e.op().properties();
    default:
      break;
  }
  std::vector<PropertySet> child_props;
  child_props.reserve(e.arity());
  for (const auto& c : e.children()) child_props.push_back(infer(c));

  RuleContext ctx{e, child_props, {}, {}};
  if (e.is(ExprKind::times)) {
    const bool all_scalar = e.is_scalar();
    for (std::size_t i = 0; i < e.arity(); ++i) {
      if (e.child(i).is_scalar() && !all_scalar) {
        ctx.scalar_children.push_back(i);
        ctx.scalars_positive = ctx.scalars_positive && child_props[i].has(P::positive);
        ctx.scalars_nonzero = ctx.scalars_nonzero && child_props[i].has(P::non_singular);
      } else {
        ctx.factor_children.push_back(i);
      }
    }
  }

  PropertySet out;
  for (const auto& rule : inference_rules()) {
    if (rule.applies_to != e.kind() || out.has(rule.conclusion)) continue;
    if (rule.premise(ctx)) out.insert(rule.conclusion);
  }
  return close_checked(out, e.rows(), e.cols());
}

}  // namespace lagen
