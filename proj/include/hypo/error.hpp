#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hypo {

enum class ErrorKind {
  NotBlockForm,
  RankDeficientBlock,
  NotSPD,
  NotSymmetric,
  InvalidArgument,
  CovarianceFailure,
  ExpOverflow,
  SingularCovariance,
  ConstraintInfeasible,
  CoveringTooLarge,
  QuadratureNonConvergent,
  PVNotConverged,
  CalibrationUnstable,
  DensityMismatch,
  ConfigError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotBlockForm: return "NotBlockForm";
    case ErrorKind::RankDeficientBlock: return "RankDeficientBlock";
    case ErrorKind::NotSPD: return "NotSPD";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::CovarianceFailure: return "CovarianceFailure";
    case ErrorKind::ExpOverflow: return "ExpOverflow";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::ConstraintInfeasible: return "ConstraintInfeasible";
    case ErrorKind::CoveringTooLarge: return "CoveringTooLarge";
    case ErrorKind::QuadratureNonConvergent: return "QuadratureNonConvergent";
    case ErrorKind::PVNotConverged: return "PVNotConverged";
    case ErrorKind::CalibrationUnstable: return "CalibrationUnstable";
    case ErrorKind::DensityMismatch: return "DensityMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// All library failures surface as this exception; `kind()` tells the
/// caller which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace hypo
