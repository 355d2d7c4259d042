#include "dnncov/error.hpp"

namespace dnncov {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInput: return "input";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kInvalidNeuron: return "invalid-neuron";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + " error: " + message), code_(code) {}

}  // namespace dnncov
