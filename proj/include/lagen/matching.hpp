#pragma once

#include <functional>
#include <vector>

#include "lagen/kerneldb.hpp"
#include "lagen/pattern.hpp"

namespace lagen {

using Constraint = std::function<bool(const Substitution&)>;

/// All substitutions of `p` into subexpressions of `subject`. Products match
/// contiguous runs of a Times' non-scalar children; sums match subsets of a
/// Plus' summands, each summand matched whole. Sorted by site, then bindings.
std::vector<Substitution> match(const Pattern& p, const Expr& subject,
                                const Constraint& constraint = {});
std::vector<Substitution> match(const Kernel& k, const Expr& subject);

struct KernelMatch {
  const Kernel* kernel;
  Substitution sub;
};

/// match() over every kernel, in catalogue order.
std::vector<KernelMatch> match_all(const std::vector<Kernel>& ks, const Expr& subject);

/// The split of a product node used by the matcher: literal and 1x1 leaf
/// children form the coefficient; the rest are factors. In a product of
/// 1x1 operands only, every non-literal child is a factor.
struct ProductSplit {
  std::vector<std::size_t> scalars;  // includes the literal, if any
  std::vector<std::size_t> factors;
  bool scalars_are_leaves = true;
};
ProductSplit split_product(const Expr& times);

}  // namespace lagen
