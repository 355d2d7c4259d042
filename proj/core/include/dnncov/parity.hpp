#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dnncov/model.hpp"
#include "dnncov/tensor.hpp"

namespace dnncov {

/// Reference outputs produced by the exporting framework for a set of dataset
/// samples (docs/parity_manifest.md).
struct ParityManifest {
  struct Sample {
    std::size_t index = 0;  // ordinal into the dataset
    std::size_t label = 0;  // exporter's predicted label
    std::vector<double> logits;  // exporter's final-layer output
  };
  std::filesystem::path model_file;
  double tolerance = 1e-3;
  std::vector<Sample> samples;
};

struct ParityResult {
  std::size_t samples_checked = 0;
  std::size_t label_mismatches = 0;
  double max_abs_error = 0.0;
  double tolerance = 0.0;

  bool passed() const { return label_mismatches == 0 && max_abs_error <= tolerance; }
};

ParityManifest load_parity_manifest(const std::filesystem::path& path);

/// Runs the engine on every manifest sample and compares per-logit values and
/// argmax against the reference. Images are reshaped to the model's input
/// shape when their element counts agree.
ParityResult check_parity(const NetworkModel& model, std::span<const Tensor> images, const ParityManifest& manifest);

}  // namespace dnncov
