#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnncov/engine.hpp"
#include "dnncov/model.hpp"

namespace dnncov {

/// Two distinct neurons i < j of coverage layer `layer_pair` and one neuron q
/// of coverage layer `layer_pair + 1`.
struct Triplet {
  std::size_t layer_pair = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t q = 0;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

/// Full activation configuration of a triplet: bit 2 = i fired, bit 1 = j
/// fired, bit 0 = q fired. Values 0..7; a triplet's mask has bit `config` set
/// once that configuration was observed.
using Config = std::uint8_t;

inline constexpr Config make_config(bool i, bool j, bool q) {
  return static_cast<Config>((i ? 4 : 0) | (j ? 2 : 0) | (q ? 1 : 0));
}

/// 12-bit set of pair cells covered by a mask. Cell layout: bits 0-3 pair
/// (i,j), bits 4-7 pair (i,q), bits 8-11 pair (j,q); within a pair the cell
/// index is first*2 + second.
std::uint16_t pair_cells(std::uint8_t mask);
inline constexpr std::uint16_t kAllPairCells = 0x0FFF;
inline bool fully_covered(std::uint8_t mask) { return pair_cells(mask) == kAllPairCells; }

/// Implicit enumeration of all triplets of a model in lexicographic
/// (layer_pair, i, j, q) order.
class TripletRegistry {
 public:
  TripletRegistry(std::string model_name, std::vector<std::size_t> layer_sizes);
  static TripletRegistry for_model(const NetworkModel& model);

  /// Σ_k C(N_k, 2) · N_{k+1}
  static std::size_t closed_form_count(std::span<const std::size_t> layer_sizes);

  const std::string& model_name() const noexcept { return model_name_; }
  const std::vector<std::size_t>& layer_sizes() const noexcept { return layer_sizes_; }
  std::size_t layer_pair_count() const noexcept { return layer_sizes_.size() - 1; }
  std::size_t total_count() const noexcept { return offsets_.back(); }
  std::size_t pair_offset(std::size_t layer_pair) const { return offsets_.at(layer_pair); }

  Triplet triplet(std::size_t index) const;
  std::size_t index_of(const Triplet& t) const;

  /// Stable 64-bit identity of (model name, layer sizes).
  std::uint64_t fingerprint() const;

  friend bool operator==(const TripletRegistry&, const TripletRegistry&) = default;

 private:
  std::string model_name_;
  std::vector<std::size_t> layer_sizes_;
  std::vector<std::size_t> offsets_;  // size = pairs + 1
};

struct CoverageStats {
  double triplet_coverage = 0.0;      // fully covered triplets / total
  double pair_cell_coverage = 0.0;    // covered pair cells / (12 · total)
  double full_config_coverage = 0.0;  // observed configs / (8 · total)
  std::size_t total_triplets = 0;
  std::size_t covered_triplets = 0;
  std::size_t covered_pair_cells = 0;
  std::size_t observed_configs = 0;

  friend bool operator==(const CoverageStats&, const CoverageStats&) = default;
};

/// Observed activation configurations for every triplet of a registry. Mask
/// bits only ever go from 0 to 1. Single writer; stats and target selection
/// need a quiescent state.
class CoverageState {
 public:
  explicit CoverageState(TripletRegistry registry, double threshold = 0.0);

  /// Rebuilds a state from stored parts (snapshot resume).
  static CoverageState restore(TripletRegistry registry, double threshold, std::uint64_t inputs_observed,
                               std::vector<std::uint8_t> masks);

  const TripletRegistry& registry() const noexcept { return registry_; }
  double threshold() const noexcept { return threshold_; }
  std::uint64_t inputs_observed() const noexcept { return inputs_observed_; }
  std::span<const std::uint8_t> masks() const noexcept { return masks_; }
  std::uint8_t mask(std::size_t index) const { return masks_.at(index); }

  /// Sets, for every triplet, the bit of the configuration (φ_i > θ, φ_j > θ,
  /// φ_q > θ) seen in `trace`. Throws kShapeMismatch if the trace's layer
  /// sizes differ from the registry's.
  void observe(const ActivationTrace& trace);
  void observe(std::span<const std::vector<double>> layer_values);

  /// Bitwise-OR of another state over the same registry.
  void merge(const CoverageState& other);

  friend bool operator==(const CoverageState&, const CoverageState&) = default;

 private:
  TripletRegistry registry_;
  double threshold_;
  std::uint64_t inputs_observed_ = 0;
  std::vector<std::uint8_t> masks_;
};

CoverageStats stats(const CoverageState& state);

struct CoverageTarget {
  Triplet triplet;
  std::size_t index = 0;  // registry ordinal
  Config config = 0;      // unobserved configuration to aim for
  friend bool operator==(const CoverageTarget&, const CoverageTarget&) = default;
};

/// Configuration whose observation would cover the most missing pair cells of
/// `mask` (ties to the lowest value); nullopt when `mask` is fully covered.
std::optional<Config> best_target_config(std::uint8_t mask);

/// Up to `count` distinct not-fully-covered triplets drawn uniformly under
/// `rng_seed`, each with best_target_config. Empty when everything is covered.
std::vector<CoverageTarget> uncovered_targets(const CoverageState& state, std::uint64_t rng_seed, std::size_t count);

/// Baseline metric: fraction of coverage neurons that exceeded the threshold
/// on at least one observed input.
class NeuronCoverage {
 public:
  NeuronCoverage(std::vector<std::size_t> layer_sizes, double threshold = 0.0);
  explicit NeuronCoverage(const NetworkModel& model, double threshold = 0.0)
      : NeuronCoverage(model.coverage_layer_sizes(), threshold) {}

  void observe(const ActivationTrace& trace);

  std::size_t total() const noexcept { return total_; }
  std::size_t covered() const noexcept { return covered_; }
  std::uint64_t inputs_observed() const noexcept { return inputs_observed_; }
  double fraction() const;

 private:
  std::vector<std::size_t> layer_sizes_;
  double threshold_;
  std::vector<std::vector<bool>> fired_;
  std::size_t total_ = 0;
  std::size_t covered_ = 0;
  std::uint64_t inputs_observed_ = 0;
};

double neuron_coverage(std::span<const ActivationTrace> traces, double threshold = 0.0);

}  // namespace dnncov
