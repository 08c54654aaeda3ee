#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagen/program.hpp"
#include "lagen/search.hpp"
#include "lagen/verify.hpp"

namespace lagen {

class ListingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CopyOp {
  std::size_t before = 0;  // index of the call it precedes
  Operand operand;
  int from = 0;
  int to = 0;
  double touches = 0;
};

struct ConversionOp {
  std::size_t before = 0;  // calls.size() for conversions after the last call
  Operand operand;
  int buffer = 0;
  StorageFormat from = StorageFormat::full;
  StorageFormat to = StorageFormat::full;
  double touches = 0;
};

struct MemoryPlan {
  std::map<std::string, int> buffer;             // operand -> buffer
  std::map<std::string, StorageFormat> format;   // format the operand is produced in
  std::vector<int> result_buffer;                // per call, buffer of results[0]
  std::vector<bool> in_place;                    // per call
  std::vector<CopyOp> copies;
  std::vector<ConversionOp> conversions;
  int buffer_count = 0;

  double overhead() const;
};

/// Buffer assignment with liveness-based overwriting; copies where an
/// overwritten argument is still needed.
MemoryPlan plan_memory(const Program& p);

enum class StepKind : std::uint8_t { call, copy, convert };

struct Step {
  StepKind kind = StepKind::call;
  std::size_t index = 0;  // into calls, copies or conversions
};

/// A program with its memory plan and the interleaved copy/convert steps.
struct Lowered {
  Program program;
  MemoryPlan plan;
  std::vector<Step> steps;
};

/// Conversions so that every call sees its arguments in the required format
/// and every output ends in full storage.
Lowered insert_conversions(const Program& p, MemoryPlan plan);
Lowered lower(const Program& p);

/// Storage format a call needs for each argument, by operand name.
std::map<std::string, StorageFormat> required_formats(const KernelCall& c);
/// Buffer a factorization writes in place (index into results), or -1.
int factorization_overwrite(const KernelCall& c);

enum class EmitFormat : std::uint8_t { listing_text, listing_json, pseudocode };

std::string emit(const Lowered& l, EmitFormat f);
/// Inverse of emit(listing_json).
Lowered parse_listing_json(const std::string& text);

/// Reads after overwrites and format violations found by replaying the plan.
std::vector<std::string> audit(const Lowered& l);
/// Runs the lowered listing on buffers; regions outside a storage format
/// hold NaN. Returns output values by left-hand side.
Values execute_lowered(const Lowered& l, const ProblemInstance& inst);

/// Node states, rewrites, kernels and costs along a root-to-terminal path.
std::string derivation_report(const DerivationGraph& g, const Path& path);

}  // namespace lagen
