#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagen/props.hpp"

namespace lagen {

class MalformedExpression : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Origin : std::uint8_t { input, intermediate, factorization_output };

/// A named matrix, vector or scalar. Cheap to copy; two operands are the same
/// operand iff their names agree.
class Operand {
 public:
  Operand() = default;
  Operand(std::string name, long rows, long cols, PropertySet properties = {},
          Origin origin = Origin::input);

  /// Canonical identity matrix of order n.
  static Operand identity(long n);
  /// Canonical zero matrix of the given shape.
  static Operand zero(long rows, long cols);

  const std::string& name() const { return d_->name; }
  long rows() const { return d_->rows; }
  long cols() const { return d_->cols; }
  const PropertySet& properties() const { return d_->properties; }
  bool has(Property p) const { return d_->properties.has(p); }
  Origin origin() const { return d_->origin; }
  bool is_factor() const { return d_->origin == Origin::factorization_output; }
  bool is_scalar() const { return d_->rows == 1 && d_->cols == 1; }
  bool is_vector() const { return !is_scalar() && (d_->rows == 1 || d_->cols == 1); }
  bool is_square() const { return d_->rows == d_->cols; }
  bool valid() const { return static_cast<bool>(d_); }

  bool operator==(const Operand& o) const { return d_ == o.d_ || name() == o.name(); }

 private:
  struct Data {
    std::string name;
    long rows;
    long cols;
    PropertySet properties;
    Origin origin;
  };
  std::shared_ptr<const Data> d_;
};

/// Node kinds, declared in the rank order used by the total term order.
enum class ExprKind : std::uint8_t {
  literal,
  operand,
  transpose,
  inverse,
  times,
  plus,
};

/// Immutable expression tree. Plus and Times are n-ary and flattened on
/// construction; subtraction is a Plus with a -1 coefficient on the subtrahend.
class Expr {
 public:
  Expr() = default;

  static Expr literal(double value);
  static Expr operand(const Operand& op);
  static Expr transpose(const Expr& e);
  static Expr inverse(const Expr& e);
  /// Flattens nested products and checks conformability. 1x1 factors are
  /// exempt from conformability (they act as scalars).
  static Expr times(std::vector<Expr> children);
  static Expr plus(std::vector<Expr> children);

  ExprKind kind() const { return n_->kind; }
  long rows() const { return n_->rows; }
  long cols() const { return n_->cols; }
  bool is_scalar() const { return n_->rows == 1 && n_->cols == 1; }
  bool is_square() const { return n_->rows == n_->cols; }
  const std::vector<Expr>& children() const { return n_->children; }
  const Expr& child(std::size_t i = 0) const { return n_->children.at(i); }
  std::size_t arity() const { return n_->children.size(); }
  double value() const { return n_->value; }
  const Operand& op() const { return n_->op; }
  bool valid() const { return static_cast<bool>(n_); }

  bool is(ExprKind k) const { return n_->kind == k; }
  /// Operand, possibly wrapped in transpose and/or inverse.
  bool is_leaf() const;
  /// The operand under a leaf's modifiers.
  const Operand& leaf_operand() const;
  bool leaf_transposed() const;
  bool leaf_inverted() const;

  /// Structural key; equal keys <=> structurally identical trees.
  const std::string& key() const { return n_->key; }
  std::size_t hash() const { return n_->hash; }
  /// Number of nodes in the tree.
  std::size_t size() const { return n_->size; }

  bool operator==(const Expr& o) const { return n_ == o.n_ || key() == o.key(); }

  /// Infix rendering, e.g. "A^T (B + C)^-1".
  std::string str() const;

 private:
  struct Node {
    ExprKind kind;
    long rows = 0;
    long cols = 0;
    double value = 0.0;
    Operand op;
    std::vector<Expr> children;
    std::string key;
    std::size_t hash = 0;
    std::size_t size = 1;
  };
  explicit Expr(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
  static Expr make(Node n);

  std::shared_ptr<const Node> n_;
};

struct ExprHash {
  std::size_t operator()(const Expr& e) const { return e.hash(); }
};

/// Structural total order: (kind rank, operand name / literal value,
/// children lexicographically).
std::strong_ordering compare(const Expr& a, const Expr& b);

/// Totally ordered key wrapping compare().
struct OrderKey {
  Expr e;
  std::strong_ordering operator<=>(const OrderKey& o) const { return compare(e, o.e); }
  bool operator==(const OrderKey& o) const { return e == o.e; }
};
OrderKey order_key(const Expr& e);

/// Rewrites into the canonical sum of products: transpose and inverse pushed
/// onto operands where algebra allows, scalars folded into a leading
/// coefficient, identities removed, like terms combined and terms sorted.
Expr normalize(const Expr& e);

/// Sound (not complete) algebraic equivalence via normal forms.
bool equivalent(const Expr& a, const Expr& b);

/// normalize(e^T) and normalize(e^-1).
Expr transpose_of(const Expr& e);
Expr inverse_of(const Expr& e);

/// Replace operands (by name) with expressions. Not normalized.
Expr substitute(const Expr& e, const std::map<std::string, Expr>& with);

/// Visits every operand occurrence.
void for_each_operand(const Expr& e, const std::function<void(const Operand&)>& fn);
bool contains_operand(const Expr& e, const std::string& name);
/// True if some occurrence of `name` sits below an Inverse node.
bool occurs_inside_inverse(const Expr& e, const std::string& name);

/// Splits a product (or any expression) into leading scalar coefficient and
/// the remaining factors. For a non-product, the factor list is {e}.
struct Term {
  double coefficient = 1.0;
  std::vector<Expr> scalars;  // 1x1 non-literal factors, sorted
  std::vector<Expr> factors;  // remaining factors in order
};
Term split_term(const Expr& e);
Expr build_term(const Term& t, long rows, long cols);

/// Number of operand occurrences.
std::size_t operand_count(const Expr& e);

}  // namespace lagen
