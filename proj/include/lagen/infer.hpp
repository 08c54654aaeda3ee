#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lagen/expr.hpp"
#include "lagen/props.hpp"

namespace lagen {

/// What a rule sees: the node, the inferred properties of each child, and
/// for products the split into 1x1 (scalar) and matrix factors.
struct RuleContext {
  const Expr& node;
  std::span<const PropertySet> children;
  std::vector<std::size_t> scalar_children;
  std::vector<std::size_t> factor_children;
  bool scalars_positive = true;
  bool scalars_nonzero = true;

  const PropertySet& factor(std::size_t i) const { return children[factor_children[i]]; }
};

struct InferenceRule {
  std::string name;
  ExprKind applies_to;
  Property conclusion;
  std::function<bool(const RuleContext&)> premise;
};

/// The registered rule set (transpose, inverse, product, sum and structural
/// symmetry rules).
const std::vector<InferenceRule>& inference_rules();

/// Bottom-up property inference. The result is closed under implication.
/// Throws InconsistentProperties when inference produces a contradiction.
PropertySet infer(const Expr& e);

/// True iff normalize(e) == normalize(e^T).
bool syntactically_symmetric(const Expr& e);

}  // namespace lagen
