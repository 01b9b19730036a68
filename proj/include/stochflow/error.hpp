#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stochflow {

enum class ErrorKind {
  NonFiniteValue,
  UnknownMark,
  MissingDerivative,
  SingularJumpJacobian,
  SingularJacobian,
  InvalidInterval,
  InvalidArgument,
  NonFiniteState,
  NoConvergence,
  JumpFieldRejected,
  SchemeUnavailable,
  GridTooCoarse,
  MissingGradient,
  OutOfGrid,
  DimensionMismatch,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// All library failures carry a kind so callers (and the CLI) can dispatch
/// without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace stochflow
