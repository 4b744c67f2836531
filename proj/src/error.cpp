#include "slowfast/error.hpp"

namespace slowfast {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NumericalBlowup: return "NumericalBlowup";
    case ErrorKind::StabilityViolation: return "StabilityViolation";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::TailMassTooLarge: return "TailMassTooLarge";
    case ErrorKind::DegenerateDensity: return "DegenerateDensity";
    case ErrorKind::NotAffine: return "NotAffine";
    case ErrorKind::AllWeightsUnderflow: return "AllWeightsUnderflow";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::BetaTooLarge: return "BetaTooLarge";
    case ErrorKind::AsymmetricCovariance: return "AsymmetricCovariance";
    case ErrorKind::DenominatorNonpositive: return "DenominatorNonpositive";
    case ErrorKind::PNotAdmissible: return "PNotAdmissible";
    case ErrorKind::SingularSigmaY: return "SingularSigmaY";
    case ErrorKind::NovikovViolation: return "NovikovViolation";
    case ErrorKind::DimensionTooHigh: return "DimensionTooHigh";
    case ErrorKind::ZeroDensityCell: return "ZeroDensityCell";
    case ErrorKind::DegenerateProbe: return "DegenerateProbe";
    case ErrorKind::DtBiasTooLarge: return "DtBiasTooLarge";
    case ErrorKind::DegenerateErrors: return "DegenerateErrors";
    case ErrorKind::ImmediateExit: return "ImmediateExit";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::IoError:
      return 1;
    case ErrorKind::StabilityViolation:
    case ErrorKind::DomainError:
    case ErrorKind::BetaTooLarge:
    case ErrorKind::DenominatorNonpositive:
    case ErrorKind::PNotAdmissible:
    case ErrorKind::NovikovViolation:
    case ErrorKind::NotAffine:
    case ErrorKind::DimensionTooHigh:
    case ErrorKind::ImmediateExit:
      return 3;
    default:
      return 2;
  }
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

NumericalBlowup::NumericalBlowup(std::size_t step, std::size_t component, const std::string& where)
    : Error(ErrorKind::NumericalBlowup,
            where + ": non-finite state at step " + std::to_string(step) + ", component " +
                std::to_string(component)),
      step_(step),
      component_(component) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace slowfast
