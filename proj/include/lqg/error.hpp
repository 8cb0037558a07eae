#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lqg {

enum class ErrorKind {
  DimensionMismatch,
  NormalizationInfeasible,
  NotPSD,
  SingularOwnCovariance,
  SingularSystem,
  ZeroSlope,
  DegenerateStates,
  ZeroVariance,
  InconsistentInput,
  ZeroExposure,
  SingularTeamCovariance,
  DegenerateActions,
  ZeroVector,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NormalizationInfeasible: return "NormalizationInfeasible";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::SingularOwnCovariance: return "SingularOwnCovariance";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::ZeroSlope: return "ZeroSlope";
    case ErrorKind::DegenerateStates: return "DegenerateStates";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::InconsistentInput: return "InconsistentInput";
    case ErrorKind::ZeroExposure: return "ZeroExposure";
    case ErrorKind::SingularTeamCovariance: return "SingularTeamCovariance";
    case ErrorKind::DegenerateActions: return "DegenerateActions";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the ErrorKind tags so
/// callers (the CLI in particular) can map it to a stable exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Short human-readable rendering of a number for error messages.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace lqg
