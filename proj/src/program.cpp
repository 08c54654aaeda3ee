#include "lagen/program.hpp"

#include <algorithm>
#include <set>

namespace lagen {

std::string_view to_string(DeclKind k) {
  switch (k) {
    case DeclKind::matrix: return "Matrix";
    case DeclKind::column_vector: return "ColumnVector";
    case DeclKind::row_vector: return "RowVector";
    case DeclKind::scalar: return "Scalar";
    case DeclKind::identity: return "IdentityMatrix";
  }
  return "?";
}

const Declaration* ProblemSpec::find(const std::string& name) const {
  for (const auto& d : declarations) {
    if (d.operand.name() == name) return &d;
  }
  return nullptr;
}

std::vector<Operand> ProblemSpec::inputs() const {
  std::set<std::string> assigned, seen;
  std::vector<Operand> out;
  for (const auto& a : assignments) {
    for_each_operand(a.rhs, [&](const Operand& op) {
      if (assigned.count(op.name()) || op.has(Property::identity) || op.has(Property::zero)) {
        return;
      }
      if (seen.insert(op.name()).second) out.push_back(op);
    });
    assigned.insert(a.lhs.name());
  }
  return out;
}

std::string KernelCall::name() const {
  if (factorization) return factorization->name;
  return kernel ? kernel->name : "?";
}

std::vector<Operand> KernelCall::arguments() const {
  std::vector<Operand> out;
  auto add = [&](const Operand& op) {
    if (op.has(Property::identity) || op.has(Property::zero)) return;
    if (std::none_of(out.begin(), out.end(), [&](const Operand& o) { return o == op; })) {
      out.push_back(op);
    }
  };
  if (factorization) {
    add(target);
    return out;
  }
  for (const auto& b : sub.bindings) add(b);
  for (const auto& c : sub.coefficients) for_each_operand(c, add);
  return out;
}

std::string KernelCall::str() const {
  std::string s = name() + "(";
  const auto args = arguments();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) s += ", ";
    s += args[i].name();
  }
  s += ") -> ";
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i) s += ", ";
    s += results[i].name();
  }
  return s;
}

void collect_inputs(Program& p) {
  std::set<std::string> produced, seen;
  p.inputs.clear();
  auto read = [&](const Operand& op) {
    if (produced.count(op.name())) return;
    if (seen.insert(op.name()).second) p.inputs.push_back(op);
  };
  for (const auto& c : p.calls) {
    for (const auto& a : c.arguments()) read(a);
    for (const auto& r : c.results) produced.insert(r.name());
  }
  for (const auto& [lhs, op] : p.outputs) read(op);
}

}  // namespace lagen
