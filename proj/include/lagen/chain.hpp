#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagen/kerneldb.hpp"
#include "lagen/matching.hpp"

namespace lagen {

/// One factor of a chain: an operand under optional transpose/inverse.
struct ChainElement {
  Expr expr;  // the leaf
  bool transposed = false;
  bool inverted = false;
  PropertySet properties;  // of the operand
  long rows = 0;           // after modifiers
  long cols = 0;

  static ChainElement from(const Expr& leaf);
};

/// One kernel application produced by a constructive algorithm. `sub`
/// binds concrete operands; `value` is the normalized value of the result
/// in terms of the algorithm's input leaves.
struct ChainStep {
  const Kernel* kernel = nullptr;
  Substitution sub;
  Expr value;
  Operand result;
  double cost = 0;
};

struct ChainResult {
  std::vector<ChainStep> steps;
  double cost = 0;
  Expr result;                 // expression standing for the whole chain
  std::string parenthesization;
};

/// Names the result of a step from its value. The default creates fresh
/// operands C1, C2, ... with inferred properties.
using Namer = std::function<Operand(const Expr& value)>;

/// Cheapest way to multiply two leaves: optional materialization of each
/// side (transpose or explicit inverse) followed by one product kernel.
struct MergePlan {
  double cost = 0;
  bool feasible = false;
  const Kernel* left_pre = nullptr;
  const Kernel* right_pre = nullptr;
  const Kernel* product = nullptr;
};
MergePlan plan_merge(const Expr& left, const Expr& right);

/// Generalized matrix chain: interval DP over split points, each merge
/// costed by the cheapest applicable kernel sequence (plan_merge).
/// Interval results are fresh operands whose properties are inferred from
/// the symbolic product.
ChainResult matrix_chain(const std::vector<ChainElement>& elems, const Namer& namer = {});

/// Exhaustive minimization over all parenthesizations using the same merge
/// costs (test oracle).
double chain_cost_exhaustive(const std::vector<ChainElement>& elems);

/// Greedy sum: repeatedly applies the cheapest pairwise addition. Terms are
/// single (possibly transposed, possibly scaled) operands.
ChainResult greedy_sum(const std::vector<Expr>& terms, const Namer& namer = {});

}  // namespace lagen
