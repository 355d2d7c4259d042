#include "dnncov/oracle.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "dnncov/error.hpp"

namespace dnncov {

namespace {

std::optional<std::size_t> strict_majority(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t l : labels) ++counts[l];
  for (const auto& [label, n] : counts) {
    if (2 * n > labels.size()) return label;
  }
  return std::nullopt;
}

std::vector<std::size_t> labels_of(std::span<const ActivationTrace> traces) {
  std::vector<std::size_t> labels;
  labels.reserve(traces.size());
  for (const auto& t : traces) labels.push_back(t.predicted_label);
  return labels;
}

}  // namespace

OracleVerdict differential_verdict(std::vector<std::size_t> labels) {
  OracleVerdict v;
  v.is_corner_case = std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) != labels.end();
  v.agreeing_majority = strict_majority(labels);
  v.labels = std::move(labels);
  return v;
}

OracleVerdict judge(std::span<const NetworkModel> models, const Tensor& input) {
  if (models.size() < 2) throw Error(ErrorCode::kInput, "differential oracle needs at least 2 models");
  std::vector<std::size_t> labels;
  for (const auto& m : models) labels.push_back(forward(m, input).predicted_label);
  return differential_verdict(std::move(labels));
}

double adversarial_ratio(std::span<const OracleVerdict> verdicts) {
  if (verdicts.empty()) throw Error(ErrorCode::kInput, "adversarial ratio of an empty verdict list");
  const auto corner = std::count_if(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.is_corner_case; });
  return static_cast<double>(corner) / static_cast<double>(verdicts.size());
}

OracleVerdict DifferentialOracle::judge(std::span<const ActivationTrace> traces, std::optional<std::size_t>) const {
  if (traces.size() < 2) throw Error(ErrorCode::kInput, "differential oracle needs at least 2 models");
  return differential_verdict(labels_of(traces));
}

OracleVerdict GroundTruthOracle::judge(std::span<const ActivationTrace> traces,
                                       std::optional<std::size_t> ground_truth) const {
  if (traces.empty()) throw Error(ErrorCode::kInput, "label oracle needs at least 1 model");
  if (!ground_truth) throw Error(ErrorCode::kInput, "label oracle needs a ground-truth label");
  OracleVerdict v;
  v.labels = labels_of(traces);
  v.is_corner_case = std::any_of(v.labels.begin(), v.labels.end(), [&](std::size_t l) { return l != *ground_truth; });
  v.agreeing_majority = strict_majority(v.labels);
  return v;
}

std::unique_ptr<Oracle> make_oracle(std::string_view name) {
  if (name == "differential") return std::make_unique<DifferentialOracle>();
  if (name == "labels") return std::make_unique<GroundTruthOracle>();
  throw Error(ErrorCode::kUnsupported, "unknown oracle '" + std::string(name) + "'");
}

}  // namespace dnncov
