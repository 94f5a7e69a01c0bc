#include "deepreg/error.hpp"

namespace deepreg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularOperator: return "SingularOperator";
    case ErrorCode::NoSignal: return "NoSignal";
    case ErrorCode::NoRoot: return "NoRoot";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyBackground: return "EmptyBackground";
    case ErrorCode::EmptyDefect: return "EmptyDefect";
    case ErrorCode::NotReady: return "NotReady";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace deepreg
