#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lagflow {

/// Failure categories raised by the library. The CLI maps them onto exit codes.
enum class ErrorKind {
  InvalidArgument,
  TauZeroUnsupported,
  NonPositiveEigenvalue,
  InvalidWindow,
  NotPositiveDefinite,
  ProjectionDiverged,
  GridTooCoarse,
  ObliquenessLost,
  NewtonDiverged,
  ConvexityLost,
  NonConvexDual,
  LevelOutOfRange,
  SingularHessian,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::TauZeroUnsupported: return "TauZeroUnsupported";
    case ErrorKind::NonPositiveEigenvalue: return "NonPositiveEigenvalue";
    case ErrorKind::InvalidWindow: return "InvalidWindow";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::ProjectionDiverged: return "ProjectionDiverged";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::ObliquenessLost: return "ObliquenessLost";
    case ErrorKind::NewtonDiverged: return "NewtonDiverged";
    case ErrorKind::ConvexityLost: return "ConvexityLost";
    case ErrorKind::NonConvexDual: return "NonConvexDual";
    case ErrorKind::LevelOutOfRange: return "LevelOutOfRange";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lagflow
