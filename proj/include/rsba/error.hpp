#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rsba {

enum class ErrorCode {
  AngleNearPi,
  DepthZero,
  CheiralityViolation,
  NoConvergence,
  MissingPixelMeasurement,
  DegenerateCovariance,
  NotPositiveDefinite,
  InitializationInfeasible,
  GenerationFailure,
  DimensionMismatch,
  ZeroTranslation,
  DegenerateConfiguration,
  ParseError,
  IdOutOfRange,
  CountMismatch,
  IoError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Error raised by every fallible operation in the library. The code is the
/// machine-readable part; the message carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the RSBAL reader. `line()` is 1-based; for truncated input it is
/// the line number one past the end of the file. The code is ParseError,
/// IdOutOfRange or CountMismatch.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason, ErrorCode code = ErrorCode::ParseError)
      : Error(code, "line " + std::to_string(line) + ": " + reason), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rsba
