#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lagen/expr.hpp"

namespace lagen {

/// How a pattern leaf (or a matched operand occurrence) is modified.
enum class Modifier : std::uint8_t { none = 1, transpose = 2, inverse = 4, inverse_transpose = 8 };

using ModifierMask = std::uint8_t;
inline constexpr ModifierMask kPlain = static_cast<ModifierMask>(Modifier::none);
inline constexpr ModifierMask kTransposed = static_cast<ModifierMask>(Modifier::transpose);
inline constexpr ModifierMask kInverted = static_cast<ModifierMask>(Modifier::inverse);
inline constexpr ModifierMask kInvTransposed =
    static_cast<ModifierMask>(Modifier::inverse_transpose);
inline constexpr ModifierMask kPlainOrT = kPlain | kTransposed;
inline constexpr ModifierMask kAnyInverse = kInverted | kInvTransposed;

Modifier modifier_of(const Expr& leaf);
bool is_transposed(Modifier m);
bool is_inverted(Modifier m);
/// Applies the modifier to an operand, e.g. inverse_transpose -> A^-T.
Expr apply_modifier(const Operand& op, Modifier m);

/// A pattern leaf: one variable under an allowed set of modifiers. Each
/// variable matches a single operand.
struct PatternLeaf {
  int var;
  ModifierMask allowed;
};

/// A product of leaves. With `coefficient` set, the match absorbs the scalar
/// factors (literal coefficient and 1x1 factors) of the surrounding term.
struct ProductPattern {
  bool coefficient = false;
  std::vector<PatternLeaf> leaves;
};

struct Pattern {
  enum class Shape : std::uint8_t { product, sum };
  Shape shape = Shape::product;
  /// product: exactly one entry; sum: one entry per matched summand.
  std::vector<ProductPattern> terms;
  std::vector<std::string> variables;

  std::size_t leaf_count() const;
  /// Human-readable template, e.g. "alpha op(X) op(Y) + beta Z".
  std::string str() const;
};

/// Where a match sits inside the subject: the node reached by `path`, and for
/// n-ary nodes the selected children (sorted). Empty `children` means the
/// whole node.
struct Site {
  std::vector<std::size_t> path;
  std::vector<std::size_t> children;

  auto operator<=>(const Site&) const = default;
};

struct Substitution {
  std::vector<Operand> bindings;       // by variable index
  std::vector<Modifier> modifiers;     // by leaf, flattened over pattern terms
  std::vector<Expr> coefficients;      // by pattern term; literal 1 when absent
  Site site;

  /// Effective leaf expressions, in pattern leaf order.
  std::vector<Expr> leaf_exprs(const Pattern& p) const;
  /// The value computed by the match (coefficients, leaves), not normalized.
  Expr instantiate(const Pattern& p) const;
};

/// Extracts the subexpression addressed by a site.
Expr site_expr(const Expr& subject, const Site& site);
/// Replaces the site's subexpression by `with`. Not normalized.
Expr replace_site(const Expr& subject, const Site& site, const Expr& with);

}  // namespace lagen
