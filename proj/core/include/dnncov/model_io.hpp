#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dnncov/model.hpp"

namespace dnncov {

inline constexpr int kModelFormatVersion = 1;

enum class PayloadEncoding {
  kBase64,  // weights inline in the header text
  kFile,    // weights in a sibling "<stem>.bin" file
};

/// Loads an exchange-format v1 model (see docs/model_format.md). All failures
/// are dnncov::Error: kParse (with line/field context), kShapeMismatch naming
/// the tensor, kUnsupported for unknown layer kinds, kIo for missing files.
NetworkModel load_model(const std::filesystem::path& path);

/// Parses header text; relative payload paths resolve against `base_dir`.
NetworkModel parse_model(std::string_view text, const std::filesystem::path& base_dir = ".");

/// Header text with the payload inline as base64. Weights are narrowed to
/// float32, so models created from float32 data round-trip bit-exactly.
std::string serialize_model(const NetworkModel& model);

void save_model(const NetworkModel& model, const std::filesystem::path& path,
                PayloadEncoding encoding = PayloadEncoding::kBase64);

}  // namespace dnncov
