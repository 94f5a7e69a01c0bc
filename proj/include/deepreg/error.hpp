#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace deepreg {

enum class ErrorCode {
  CoincidentPoints,
  NumericalFailure,
  DimensionMismatch,
  SingularOperator,
  NoSignal,
  NoRoot,
  IoError,
  EmptyBackground,
  EmptyDefect,
  NotReady,
  MissingInput,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

// All recoverable failures in the library surface as this exception; callers
// dispatch on code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace deepreg
