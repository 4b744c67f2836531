#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace slowfast {

enum class ErrorKind {
  InvalidArgument,
  NumericalBlowup,
  StabilityViolation,
  NonConvergence,
  TailMassTooLarge,
  DegenerateDensity,
  NotAffine,
  AllWeightsUnderflow,
  DomainError,
  BetaTooLarge,
  AsymmetricCovariance,
  DenominatorNonpositive,
  PNotAdmissible,
  SingularSigmaY,
  NovikovViolation,
  DimensionTooHigh,
  ZeroDensityCell,
  DegenerateProbe,
  DtBiasTooLarge,
  DegenerateErrors,
  ImmediateExit,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Process exit code for a failure of this kind (1 config, 2 numerical,
/// 3 assumption or regime violation).
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Non-finite value produced by an integrator. Carries the first offending
/// (step, component) pair; component indexes the concatenated (x, y) state.
class NumericalBlowup : public Error {
 public:
  NumericalBlowup(std::size_t step, std::size_t component, const std::string& where);

  std::size_t step() const noexcept { return step_; }
  std::size_t component() const noexcept { return component_; }

 private:
  std::size_t step_;
  std::size_t component_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace slowfast
