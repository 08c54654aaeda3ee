#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagen/program.hpp"

namespace lagen {

using Matrix = Eigen::MatrixXd;
using Values = std::map<std::string, Matrix>;

class InstantiationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InterpreterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemInstance {
  Values values;
  std::uint64_t seed = 0;
};

/// Random value satisfying the operand's properties.
Matrix random_value(const Operand& op, std::mt19937_64& rng);
/// Numeric property check (structure to `tol`, definiteness by eigenvalues,
/// rank by a rank-revealing QR).
bool check_properties(const Matrix& m, const PropertySet& p, double tol = 1e-8);

ProblemInstance instantiate(const std::vector<Operand>& operands, std::uint64_t seed);
/// Values for every declared operand that is read before it is assigned.
ProblemInstance instantiate(const ProblemSpec& problem, std::uint64_t seed);

/// Direct recursive evaluation; inverses via a pivoted solve. `condition`
/// receives the largest condition estimate of an inverted subterm.
Matrix evaluate(const Expr& e, const Values& env, double* condition = nullptr);
/// Evaluates each assignment in order; earlier left-hand sides are visible.
Values reference(const ProblemSpec& problem, const ProblemInstance& inst,
                 double* condition = nullptr);

struct CallResult {
  std::vector<Matrix> results;
  double counted = 0;  // arithmetic operations performed
};

/// Interprets one kernel or factorization call with naive loops.
CallResult run_call(const KernelCall& call, const Values& env);

struct Execution {
  Values values;
  std::vector<double> counted;  // per call
};
Execution execute(const Program& p, const ProblemInstance& inst);
/// Program output values, by left-hand side name.
Values outputs(const Program& p, const Execution& ex);

/// Whether the counted operations of a call agree with its claimed cost.
bool counts_agree(const KernelCall& call, double counted);

enum class VerifyStatus : std::uint8_t { pass, fail, ill_conditioned_skip };
std::string_view to_string(VerifyStatus s);

struct VerificationReport {
  VerifyStatus status = VerifyStatus::fail;
  double max_relative_error = 0;
  double condition_estimate = 1;
  double flops_claimed = 0;
  double flops_counted = 0;
  bool counts_agree = true;
  std::uint64_t seed = 0;
  std::string message;

  std::string str() const;
  std::string json() const;
};

inline constexpr double kConditionCutoff = 1e8;

/// Never throws: failures are reported in the status.
VerificationReport verify(const Program& p, const ProblemSpec& problem, std::uint64_t seed,
                          double tol = 1e-6);

struct RandomProblemConfig {
  int min_operands = 4;
  int max_operands = 7;
  long min_dim = 50;
  long max_dim = 2000;
  long step = 50;
  double property_probability = 0.75;
  double cse_probability = 0.5;
};

/// One assignment X := expression over 4..7 operands.
ProblemSpec random_problem(const RandomProblemConfig& config, std::uint64_t seed);

}  // namespace lagen
