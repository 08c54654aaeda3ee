#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lagen/expr.hpp"
#include "lagen/pattern.hpp"

namespace lagen {

enum class StorageFormat : std::uint8_t {
  full,
  lower_triangular_half,
  upper_triangular_half,
  diagonal_vector,
};

std::string_view to_string(StorageFormat f);
std::optional<StorageFormat> storage_format_from_string(std::string_view s);
/// Can data stored as `have` be read where `need` is required?
bool satisfies(StorageFormat have, StorageFormat need);

/// How the interpreter's arithmetic tally relates to the cost formula.
enum class CountMode : std::uint8_t {
  exact,          // tally == formula
  leading_order,  // tally / formula -> 1 as n grows
  uncounted,      // data movement or library-backed; excluded from tallies
};

std::string_view to_string(CountMode m);

class BindingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Dims = std::map<std::string, double>;

struct CostFormula {
  std::string text;
  std::vector<std::string> dims;
  std::function<double(const Dims&)> eval;
};

/// Structural nonzero pattern of an operand occurrence.
enum class Structure : std::uint8_t { full, lower, upper, diagonal };

Structure structure_of(const Operand& op, Modifier m = Modifier::none);
/// Stored element count for a structure of the given shape.
double nonzeros(Structure s, long rows, long cols);
/// Format a freshly computed value of `op` lives in when nothing else is
/// required.
StorageFormat natural_format(const Operand& op);

struct Kernel {
  std::string name;
  std::string family;  // BLAS/LAPACK analogue used in listings
  Pattern pattern;
  std::string constraint_text;
  std::function<bool(const Substitution&)> constraint;
  std::function<Dims(const Substitution&)> dims;
  CostFormula cost;
  /// Variable index the result overwrites, or -1.
  std::function<int(const Substitution&)> overwrites;
  /// Required format per variable.
  std::function<std::vector<StorageFormat>(const Substitution&)> formats;
  std::function<StorageFormat(const Substitution&)> result_format;
  CountMode count_mode = CountMode::exact;
};

/// The fixed catalogue, in matching order.
const std::vector<Kernel>& builtin_kernels();
const Kernel* find_kernel(std::string_view name);

/// Evaluates the kernel's formula. Throws BindingError if a dimension the
/// formula uses is absent.
double cost(const Kernel& k, const Dims& dims);
double cost(const Kernel& k, const Substitution& s);

/// True iff the coefficient is not the literal 1.
bool nontrivial_coefficient(const Expr& c);

enum class FactorizationKind : std::uint8_t { cholesky, lu, qr, eigendecomposition, svd };

std::string_view to_string(FactorizationKind k);

struct FactorOutput {
  std::string role;  // L, U, P, Q, R, Z, W, V, S
  long rows;
  long cols;
  PropertySet properties;
  StorageFormat format;
};

struct Factorization {
  FactorizationKind kind;
  std::string name;
  CostFormula cost;
  CountMode count_mode;
  std::string product_text;  // e.g. "L L^T"

  bool applicable(const Operand& a) const;
  std::vector<FactorOutput> outputs(const Operand& a) const;
  /// The target written in terms of its factors (in outputs() order).
  Expr product(const std::vector<Operand>& factors) const;
  Dims dims(const Operand& a) const;
};

const std::vector<Factorization>& builtin_factorizations();
const Factorization* find_factorization(std::string_view name);
/// Candidates for an operand that occurs inside an inverse, best first.
std::vector<const Factorization*> factorizations_for(const Operand& op);

double cost(const Factorization& f, const Dims& dims);

/// Human-readable catalogue: name, pattern, constraints, cost formula.
std::string kernel_table();

}  // namespace lagen
