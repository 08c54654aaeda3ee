#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lagen {

/// Matrix properties understood by the generator.
enum class Property : std::uint8_t {
  diagonal,
  lower_triangular,
  upper_triangular,
  symmetric,
  spsd,
  spd,
  orthogonal,
  orthogonal_rows,
  orthogonal_columns,
  permutation,
  unit_diagonal,
  positive,
  full_rank,
  non_singular,
  zero,
  identity,
};

inline constexpr std::size_t kPropertyCount = 16;

inline constexpr std::array<Property, kPropertyCount> kAllProperties = {
    Property::diagonal,           Property::lower_triangular,
    Property::upper_triangular,   Property::symmetric,
    Property::spsd,               Property::spd,
    Property::orthogonal,         Property::orthogonal_rows,
    Property::orthogonal_columns, Property::permutation,
    Property::unit_diagonal,      Property::positive,
    Property::full_rank,          Property::non_singular,
    Property::zero,               Property::identity,
};

/// snake_case name, e.g. "lower_triangular".
std::string_view to_string(Property p);
/// CamelCase spelling used by the input language, e.g. "LowerTriangular".
std::string_view dsl_name(Property p);
std::optional<Property> property_from_dsl(std::string_view name);

class InconsistentProperties : public std::runtime_error {
 public:
  InconsistentProperties(Property a, Property b, const std::string& what)
      : std::runtime_error(what), first(a), second(b) {}
  Property first;
  Property second;
};

class PropertySet {
 public:
  PropertySet() = default;
  PropertySet(std::initializer_list<Property> ps) {
    for (auto p : ps) insert(p);
  }

  bool has(Property p) const { return bits_.test(index(p)); }
  void insert(Property p) { bits_.set(index(p)); }
  void erase(Property p) { bits_.reset(index(p)); }
  bool empty() const { return bits_.none(); }
  std::size_t size() const { return bits_.count(); }

  bool contains_all(const PropertySet& o) const {
    return (bits_ & o.bits_) == o.bits_;
  }
  PropertySet operator|(const PropertySet& o) const {
    PropertySet r;
    r.bits_ = bits_ | o.bits_;
    return r;
  }
  PropertySet operator&(const PropertySet& o) const {
    PropertySet r;
    r.bits_ = bits_ & o.bits_;
    return r;
  }
  bool operator==(const PropertySet& o) const { return bits_ == o.bits_; }

  std::vector<Property> list() const;
  std::uint32_t bits() const { return static_cast<std::uint32_t>(bits_.to_ulong()); }

  bool is_triangular() const {
    return has(Property::lower_triangular) || has(Property::upper_triangular);
  }

  /// "{diagonal, spd}" style rendering, in enumeration order.
  std::string str() const;

 private:
  static std::size_t index(Property p) { return static_cast<std::size_t>(p); }
  std::bitset<kPropertyCount> bits_;
};

/// Closes `p` under the implication rules for an operand of the given shape.
/// Square-only implications (e.g. full rank => non-singular) fire only when
/// rows == cols.
PropertySet close(PropertySet p, long rows, long cols);

/// Returns the first clashing pair, if any. A shape-restricted property on a
/// non-square shape clashes with itself.
std::optional<std::pair<Property, Property>> find_contradiction(
    const PropertySet& p, long rows, long cols);

/// True iff the closure of `p` has no contradictory pair and every
/// square-only property sits on a square shape.
bool consistent(const PropertySet& p, long rows, long cols);

/// close() followed by a contradiction check; throws InconsistentProperties.
PropertySet close_checked(const PropertySet& p, long rows, long cols);

/// True if the set guarantees that an inverse exists.
inline bool implies_invertible(const PropertySet& p) {
  return p.has(Property::non_singular);
}

}  // namespace lagen
