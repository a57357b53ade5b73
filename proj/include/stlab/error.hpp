#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stlab {

enum class ErrorCode {
  NonSymmetric,
  NumericalFailure,
  NotPSD,
  DimensionMismatch,
  InvalidSpec,
  InvalidParams,
  NoRoot,
  NonConvergence,
  DegenerateDenominator,
  RankDeficient,
  ParseError,
  ValidationError,
  UnknownFigure,
  UnknownField,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. The code identifies the failure class,
/// the message carries the offending values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace stlab
