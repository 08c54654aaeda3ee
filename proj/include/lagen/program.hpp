#pragma once

#include <map>
#include <string>
#include <vector>

#include "lagen/expr.hpp"
#include "lagen/kerneldb.hpp"

namespace lagen {

struct Assignment {
  Operand lhs;
  Expr rhs;
};

enum class DeclKind : std::uint8_t { matrix, column_vector, row_vector, scalar, identity };

std::string_view to_string(DeclKind k);

struct Declaration {
  DeclKind kind = DeclKind::matrix;
  Operand operand;
  std::string rows_text;  // as written: size name or integer
  std::string cols_text;
};

/// A parsed input problem.
struct ProblemSpec {
  std::vector<std::pair<std::string, long>> sizes;
  std::vector<Declaration> declarations;
  std::vector<Assignment> assignments;

  const Declaration* find(const std::string& name) const;
  /// Declared operands read by some right-hand side before (or without)
  /// being assigned.
  std::vector<Operand> inputs() const;
};

/// One kernel or factorization invocation.
struct KernelCall {
  const Kernel* kernel = nullptr;
  const Factorization* factorization = nullptr;
  Substitution sub;              // kernel bindings
  Operand target;                // factorization input
  std::vector<Operand> results;  // kernel: one; factorization: its outputs
  Expr value;                    // what results[0] stands for, in argument operands
  double flops = 0;

  std::string name() const;
  bool is_factorization() const { return factorization != nullptr; }
  /// Operands read by the call, in binding order, without repeats.
  std::vector<Operand> arguments() const;
  /// "gemm_nz(A, B) -> T1" style rendering.
  std::string str() const;
};

struct Program {
  std::vector<KernelCall> calls;
  std::vector<Operand> inputs;
  std::vector<std::pair<Operand, Operand>> outputs;  // LHS -> computed operand
  double total_cost = 0;
};

/// Rebuilds inputs from the calls and outputs; every operand read before
/// being produced is an input.
void collect_inputs(Program& p);

}  // namespace lagen
