#include "lagen/props.hpp"

#include <sstream>

namespace lagen {

namespace {

struct PropertyNames {
  Property p;
  std::string_view snake;
  std::string_view camel;
};

constexpr std::array<PropertyNames, kPropertyCount> kNames = {{
    {Property::diagonal, "diagonal", "Diagonal"},
    {Property::lower_triangular, "lower_triangular", "LowerTriangular"},
    {Property::upper_triangular, "upper_triangular", "UpperTriangular"},
    {Property::symmetric, "symmetric", "Symmetric"},
    {Property::spsd, "spsd", "SPSD"},
    {Property::spd, "spd", "SPD"},
    {Property::orthogonal, "orthogonal", "Orthogonal"},
    {Property::orthogonal_rows, "orthogonal_rows", "OrthogonalRows"},
    {Property::orthogonal_columns, "orthogonal_columns", "OrthogonalColumns"},
    {Property::permutation, "permutation", "Permutation"},
    {Property::unit_diagonal, "unit_diagonal", "UnitDiagonal"},
    {Property::positive, "positive", "Positive"},
    {Property::full_rank, "full_rank", "FullRank"},
    {Property::non_singular, "non_singular", "NonSingular"},
    {Property::zero, "zero", "Zero"},
    {Property::identity, "identity", "Identity"},
}};

// Properties that only make sense on square operands.
constexpr std::array<Property, 8> kSquareOnly = {
    Property::spd,          Property::spsd,        Property::symmetric,
    Property::identity,     Property::permutation, Property::orthogonal,
    Property::non_singular, Property::diagonal,
};

constexpr std::array<Property, 10> kExcludedByZero = {
    Property::non_singular, Property::full_rank,       Property::identity,
    Property::spd,          Property::orthogonal,      Property::orthogonal_rows,
    Property::orthogonal_columns, Property::permutation, Property::unit_diagonal,
    Property::positive,
};

}  // namespace

std::string_view to_string(Property p) {
  return kNames[static_cast<std::size_t>(p)].snake;
}

std::string_view dsl_name(Property p) {
  return kNames[static_cast<std::size_t>(p)].camel;
}

std::optional<Property> property_from_dsl(std::string_view name) {
  for (const auto& n : kNames) {
    if (n.camel == name) return n.p;
  }
  // A few common alternative spellings.
  if (name == "Spd") return Property::spd;
  if (name == "Spsd") return Property::spsd;
  if (name == "NonSingular" || name == "Nonsingular") return Property::non_singular;
  if (name == "Orthogonal_columns" || name == "OrthogonalColumns")
    return Property::orthogonal_columns;
  return std::nullopt;
}

std::vector<Property> PropertySet::list() const {
  std::vector<Property> out;
  for (auto p : kAllProperties) {
    if (has(p)) out.push_back(p);
  }
  return out;
}

std::string PropertySet::str() const {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (auto p : list()) {
    if (!first) os << ", ";
    os << to_string(p);
    first = false;
  }
  os << '}';
  return os.str();
}

PropertySet close(PropertySet p, long rows, long cols) {
  using P = Property;
  const bool square = rows == cols;
  const bool scalar = rows == 1 && cols == 1;
  // Iterate to a fixed point; the rule set is small.
  for (;;) {
    const auto before = p;
    auto imply = [&](P from, std::initializer_list<P> to) {
      if (p.has(from)) {
        for (auto t : to) p.insert(t);
      }
    };
    if (scalar) {
      p.insert(P::symmetric);
      p.insert(P::diagonal);
      if (p.has(P::non_singular) || p.has(P::positive)) {
        p.insert(P::non_singular);
      }
    }
    if (square) {
      imply(P::identity, {P::diagonal, P::spd, P::orthogonal, P::permutation,
                          P::unit_diagonal});
    }
    imply(P::diagonal, {P::lower_triangular, P::upper_triangular, P::symmetric});
    if (square && p.has(P::lower_triangular) && p.has(P::upper_triangular)) {
      p.insert(P::diagonal);
    }
    imply(P::spd, {P::spsd, P::non_singular});
    imply(P::spsd, {P::symmetric});
    if (p.has(P::symmetric) && p.is_triangular()) p.insert(P::diagonal);
    imply(P::permutation, {P::orthogonal});
    imply(P::orthogonal, {P::orthogonal_rows, P::orthogonal_columns, P::non_singular});
    if (square && (p.has(P::orthogonal_rows) || p.has(P::orthogonal_columns))) {
      p.insert(P::orthogonal);
    }
    imply(P::orthogonal_rows, {P::full_rank});
    imply(P::orthogonal_columns, {P::full_rank});
    imply(P::non_singular, {P::full_rank});
    if (square && p.has(P::full_rank)) p.insert(P::non_singular);
    if (p.has(P::spsd) && p.has(P::non_singular)) p.insert(P::spd);
    if (square && p.is_triangular() && p.has(P::unit_diagonal)) {
      p.insert(P::non_singular);
    }
    if (scalar && p.has(P::positive)) p.insert(P::spd);
    if (p.has(P::zero)) {
      p.insert(P::lower_triangular);
      p.insert(P::upper_triangular);
      if (square) {
        p.insert(P::diagonal);
        p.insert(P::symmetric);
        p.insert(P::spsd);
      }
    }
    if (p == before) return p;
  }
}

std::optional<std::pair<Property, Property>> find_contradiction(
    const PropertySet& raw, long rows, long cols) {
  const auto p = close(raw, rows, cols);
  if (p.has(Property::zero)) {
    for (auto q : kExcludedByZero) {
      if (p.has(q)) return std::make_pair(Property::zero, q);
    }
  }
  if (rows != cols) {
    for (auto q : kSquareOnly) {
      if (p.has(q)) return std::make_pair(q, q);
    }
  }
  if (p.has(Property::positive) && !(rows == 1 && cols == 1)) {
    return std::make_pair(Property::positive, Property::positive);
  }
  if (p.has(Property::orthogonal_rows) && rows > cols) {
    return std::make_pair(Property::orthogonal_rows, Property::orthogonal_rows);
  }
  if (p.has(Property::orthogonal_columns) && rows < cols) {
    return std::make_pair(Property::orthogonal_columns, Property::orthogonal_columns);
  }
  return std::nullopt;
}

bool consistent(const PropertySet& p, long rows, long cols) {
  return !find_contradiction(p, rows, cols).has_value();
}

PropertySet close_checked(const PropertySet& p, long rows, long cols) {
  if (auto clash = find_contradiction(p, rows, cols)) {
    std::string msg = "inconsistent properties: ";
    msg += to_string(clash->first);
    if (clash->first == clash->second) {
      msg += " is not valid for a " + std::to_string(rows) + "x" +
             std::to_string(cols) + " operand";
    } else {
      msg += " contradicts ";
      msg += to_string(clash->second);
    }
    throw InconsistentProperties(clash->first, clash->second, msg);
  }
  return close(p, rows, cols);
}

}  // namespace lagen
