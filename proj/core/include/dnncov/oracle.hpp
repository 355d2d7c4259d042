#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dnncov/engine.hpp"
#include "dnncov/model.hpp"

namespace dnncov {

struct OracleVerdict {
  std::vector<std::size_t> labels;  // predicted class per model
  bool is_corner_case = false;
  std::optional<std::size_t> agreeing_majority;  // label held by > half the models

  friend bool operator==(const OracleVerdict&, const OracleVerdict&) = default;
};

/// Corner case iff the labels are not all equal.
OracleVerdict differential_verdict(std::vector<std::size_t> labels);

/// Runs every model on `input` and compares their argmax labels (lowest index
/// wins ties). Needs at least two models.
OracleVerdict judge(std::span<const NetworkModel> models, const Tensor& input);

/// Corner cases / verdicts. Throws kInput on an empty list.
double adversarial_ratio(std::span<const OracleVerdict> verdicts);

/// Pluggable correctness policy over the traces of one input.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual std::string_view name() const = 0;
  virtual std::size_t min_models() const = 0;
  virtual bool needs_ground_truth() const { return false; }
  virtual OracleVerdict judge(std::span<const ActivationTrace> traces,
                              std::optional<std::size_t> ground_truth) const = 0;
};

/// Multiple-implementations oracle: any disagreement is a corner case.
class DifferentialOracle final : public Oracle {
 public:
  std::string_view name() const override { return "differential"; }
  std::size_t min_models() const override { return 2; }
  OracleVerdict judge(std::span<const ActivationTrace> traces,
                      std::optional<std::size_t> ground_truth) const override;
};

/// Labeled-data oracle: a corner case is any model predicting something other
/// than the dataset label.
class GroundTruthOracle final : public Oracle {
 public:
  std::string_view name() const override { return "labels"; }
  std::size_t min_models() const override { return 1; }
  bool needs_ground_truth() const override { return true; }
  OracleVerdict judge(std::span<const ActivationTrace> traces,
                      std::optional<std::size_t> ground_truth) const override;
};

std::unique_ptr<Oracle> make_oracle(std::string_view name);

}  // namespace dnncov
