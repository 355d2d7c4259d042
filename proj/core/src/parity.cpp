#include "dnncov/parity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "dnncov/engine.hpp"
#include "dnncov/error.hpp"

namespace dnncov {

ParityManifest load_parity_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  ParityManifest m;
  try {
    const auto root = nlohmann::json::parse(in);
    m.model_file = root.at("model_file").get<std::string>();
    if (m.model_file.is_relative()) m.model_file = path.parent_path() / m.model_file;
    m.tolerance = root.value("tolerance", 1e-3);
    for (const auto& s : root.at("samples")) {
      ParityManifest::Sample sample;
      sample.index = s.at("index").get<std::size_t>();
      sample.label = s.at("label").get<std::size_t>();
      sample.logits = s.at("logits").get<std::vector<double>>();
      m.samples.push_back(std::move(sample));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return m;
}

ParityResult check_parity(const NetworkModel& model, std::span<const Tensor> images, const ParityManifest& manifest) {
  ParityResult r;
  r.tolerance = manifest.tolerance;
  for (const auto& s : manifest.samples) {
    if (s.index >= images.size()) {
      throw Error(ErrorCode::kInput, "parity sample index " + std::to_string(s.index) + " beyond dataset");
    }
    const ActivationTrace trace = forward(model, images[s.index].reshaped(model.input_shape()));
    if (trace.logits.size() != s.logits.size()) {
      throw Error(ErrorCode::kShapeMismatch, "parity sample " + std::to_string(s.index) + ": logit count differs");
    }
    for (std::size_t i = 0; i < s.logits.size(); ++i) {
      r.max_abs_error = std::max(r.max_abs_error, std::abs(trace.logits[i] - s.logits[i]));
    }
    if (trace.predicted_label != s.label) ++r.label_mismatches;
    ++r.samples_checked;
  }
  return r;
}

}  // namespace dnncov
