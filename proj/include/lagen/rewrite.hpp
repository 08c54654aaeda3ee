#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagen/kerneldb.hpp"
#include "lagen/pattern.hpp"
#include "lagen/program.hpp"

namespace lagen {

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class RewriteKind : std::uint8_t {
  normal_form,
  product_of_sums,
  inverse_push_up,
  cse_replacement,
  special_rule,
  factorization,
};

std::string_view to_string(RewriteKind k);

struct Rewrite {
  RewriteKind kind;
  Expr before;
  Expr after;
  std::vector<KernelCall> calls;
  /// Auxiliary assignments computed before `after` is evaluated. Their
  /// left-hand sides are placeholders whose names start with '$'.
  std::vector<Assignment> assignments;
};

/// Factors out common left factors, then common right factors, greedily
/// (most frequent first). Not normalized.
Expr product_of_sums(const Expr& e);
/// Rewrites runs of inverted factors, e.g. B^-1 A^-1 -> (A B)^-1.
Expr push_inverse_up(const Expr& e);
/// [product of sums, inverse pushed up, e], without structural duplicates.
std::vector<Expr> representations(const Expr& e);

struct CseOccurrence {
  Site site;  // a run of factor children of a product node
  Modifier modifier;  // occurrence = modifier(expr)
};

struct CommonSubexpression {
  Expr expr;  // normalized
  std::vector<CseOccurrence> occurrences;
};

/// Products of two or more factors occurring at least twice, counted modulo
/// transposition and inversion. Occurrences of one subexpression are
/// disjoint. Sorted by occurrence count, then operand count (both
/// descending), then order_key.
std::vector<CommonSubexpression> common_subexpressions(const Expr& e);
/// Replaces each occurrence by the matching modification of `with`, then
/// normalizes.
Expr replace_occurrences(const Expr& e, const CommonSubexpression& cse, const Operand& with);

struct SpecialRule {
  std::string name;
  std::string text;
  std::function<std::vector<Rewrite>(const Expr&)> apply;
};

const std::vector<SpecialRule>& special_rule_table();
std::vector<Rewrite> special_rules(const Expr& e);

/// Names the outputs of factorizing `target`.
using FactorNamer =
    std::function<std::vector<Operand>(const Factorization&, const Operand& target)>;

/// Substitutes the factored form of `target` everywhere in `e` and
/// normalizes. Throws PreconditionError if `target` does not occur inside an
/// inverse, is a factor, or `f` does not apply.
Rewrite apply_factorization(const Expr& e, const Operand& target, const Factorization& f,
                            const FactorNamer& namer = {});

/// Factor operands with the properties and formats `f` gives them.
std::vector<Operand> factor_operands(const Factorization& f, const Operand& target,
                                     const std::vector<std::string>& names);

}  // namespace lagen
