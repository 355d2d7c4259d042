#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dnncov {

enum class ErrorCode {
  kInput,         // caller-supplied value violates a precondition
  kShapeMismatch, // tensor/layer shapes disagree
  kNumeric,       // non-finite value produced or supplied
  kParse,         // malformed file or config
  kUnsupported,   // unknown layer kind / activation / option
  kInvalidNeuron, // NeuronId or triplet out of range
  kIo,            // filesystem failure
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library is an Error carrying a code and a
/// human-readable context string.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dnncov
