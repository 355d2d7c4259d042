#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dnncov/coverage.hpp"
#include "dnncov/engine.hpp"
#include "dnncov/oracle.hpp"

namespace dnncov {

/// How the collapsed (mean) input gradient becomes a brightness step.
enum class StepRule {
  kSign,    // offset += step_size * sign(mean gradient)
  kScaled,  // offset += step_size * mean gradient
};

/// When the uncovered target triplet is (re)selected.
enum class Retarget { kPerSeed, kPerIteration };

struct GenParams {
  double lambda1 = 1.0;  // weight of the target model inside the differential term
  double lambda2 = 0.1;  // weight of the coverage term
  double step_size = 0.1;
  std::size_t max_iterations = 1000;
  double threshold = 0.0;
  std::uint64_t rng_seed = 0;
  StepRule step_rule = StepRule::kSign;
  Retarget retarget = Retarget::kPerSeed;

  void validate() const;
  friend bool operator==(const GenParams&, const GenParams&) = default;
};

struct Candidate {
  Tensor input;
  std::size_t seed_index = 0;
  double manipulation = 0.0;  // brightness offset added before clipping
  std::size_t iterations_used = 0;
  double objective = 0.0;  // objective value at the final input
  bool target_reached = false;
  bool differential_found = false;
};

/// Coverage terms for `target` on model `target_model`: +φ for every neuron
/// whose target state is fired, −φ otherwise, all scaled by λ2. With two or
/// more models a differential term is added: +P_m(seed_label) for every
/// other model and −λ1·P_target(seed_label).
ObjectiveSpec build_objective(const Triplet& triplet, Config config, std::size_t target_model,
                              std::span<const NetworkModel> models, std::size_t seed_label, const GenParams& params);

/// Objective with no coverage terms (used once every triplet is covered).
ObjectiveSpec differential_only_objective(std::size_t target_model, std::span<const NetworkModel> models,
                                          std::size_t seed_label, const GenParams& params);

/// Brightness-constrained gradient ascent from `seed`. Each iteration takes
/// the mean of ∂objective/∂input and moves one uniform offset. Stops when all
/// coverage terms sit in their target state, when the models start to
/// disagree (if they agreed on the seed), at a fixed point, or after
/// max_iterations. A spec without coverage terms leaves the seed unchanged.
Candidate ascend(const Tensor& seed, const ObjectiveSpec& spec, const GenParams& params,
                 std::span<const NetworkModel> models, std::size_t target_model = 0);

struct GenerationRecord {
  Candidate candidate;
  std::size_t target_model = 0;
  std::optional<CoverageTarget> target;
  OracleVerdict verdict;
  std::vector<ActivationTrace> traces;  // one per model, at the candidate
  double coverage_update_seconds = 0.0;
};

/// Drives seed-by-seed generation. `states` holds one CoverageState per model
/// and is updated with every candidate. The target model rotates round-robin.
class GuidedGenerator {
 public:
  GuidedGenerator(std::span<const NetworkModel> models, std::span<CoverageState> states, const Oracle& oracle,
                  GenParams params);

  GenerationRecord step(const Tensor& seed, std::size_t seed_index,
                        std::optional<std::size_t> ground_truth = std::nullopt);

  std::size_t steps_taken() const noexcept { return steps_; }

 private:
  std::span<const NetworkModel> models_;
  std::span<CoverageState> states_;
  const Oracle& oracle_;
  GenParams params_;
  std::size_t steps_ = 0;
};

using GenerationSink = std::function<void(const GenerationRecord&, std::span<const CoverageState>)>;

/// Processes every seed in order, reporting each record to `sink`.
void generate(std::span<const Tensor> seeds, std::span<const std::size_t> seed_indices,
              std::span<const std::optional<std::size_t>> ground_truth, std::span<const NetworkModel> models,
              std::span<CoverageState> states, const Oracle& oracle, const GenParams& params,
              const GenerationSink& sink);

/// SplitMix64-style combination used to derive per-step RNG seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace dnncov
