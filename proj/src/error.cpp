#include "stochflow/error.hpp"

namespace stochflow {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::UnknownMark: return "UnknownMark";
    case ErrorKind::MissingDerivative: return "MissingDerivative";
    case ErrorKind::SingularJumpJacobian: return "SingularJumpJacobian";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::InvalidInterval: return "InvalidInterval";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::JumpFieldRejected: return "JumpFieldRejected";
    case ErrorKind::SchemeUnavailable: return "SchemeUnavailable";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::MissingGradient: return "MissingGradient";
    case ErrorKind::OutOfGrid: return "OutOfGrid";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace stochflow
