#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "lagen/program.hpp"

namespace lagen {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column)
      : std::runtime_error(what), line(line), column(column) {}
  int line;
  int column;
};

class SyntaxError : public ParseError {
  using ParseError::ParseError;
};
class UnknownPropertyError : public ParseError {
  using ParseError::ParseError;
};
class UndeclaredNameError : public ParseError {
  using ParseError::ParseError;
};
class DimensionError : public ParseError {
  using ParseError::ParseError;
};
class InconsistentPropertyError : public ParseError {
  using ParseError::ParseError;
};

/// Sizes, declarations and assignments; one statement per line, '#' comments.
ProblemSpec parse_problem(std::string_view text);
ProblemSpec parse_problem_file(const std::string& path);

std::string print_problem(const ProblemSpec& spec);
std::string dsl_expr(const Expr& e);

/// Every size (and integer dimension) multiplied by `factor`, at least `min_dim`.
ProblemSpec rescale(const ProblemSpec& spec, double factor, long min_dim);
/// Desk dimensions: 1/10, minimum 20.
inline ProblemSpec desk_scale(const ProblemSpec& spec) { return rescale(spec, 0.1, 20); }

}  // namespace lagen
