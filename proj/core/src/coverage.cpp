#include "dnncov/coverage.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "dnncov/error.hpp"

namespace dnncov {

namespace {

constexpr std::uint16_t cells_of_config(unsigned c) {
  const unsigned i = (c >> 2) & 1, j = (c >> 1) & 1, q = c & 1;
  return static_cast<std::uint16_t>((1u << (i * 2 + j)) | (1u << (4 + i * 2 + q)) | (1u << (8 + j * 2 + q)));
}

constexpr std::array<std::uint16_t, 256> make_pair_cell_table() {
  std::array<std::uint16_t, 256> t{};
  for (unsigned mask = 0; mask < 256; ++mask) {
    std::uint16_t cells = 0;
    for (unsigned c = 0; c < 8; ++c) {
      if (mask & (1u << c)) cells |= cells_of_config(c);
    }
    t[mask] = cells;
  }
  return t;
}

constexpr auto kPairCells = make_pair_cell_table();

std::size_t choose2(std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

// Ordinal of (i, j), i < j, among the lexicographic pairs of n elements.
std::size_t pair_rank(std::size_t n, std::size_t i, std::size_t j) {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

}  // namespace

std::uint16_t pair_cells(std::uint8_t mask) { return kPairCells[mask]; }

TripletRegistry::TripletRegistry(std::string model_name, std::vector<std::size_t> layer_sizes)
    : model_name_(std::move(model_name)), layer_sizes_(std::move(layer_sizes)) {
  if (layer_sizes_.size() < 2) {
    throw Error(ErrorCode::kInput, "triplet enumeration needs at least 2 coverage layers, model '" + model_name_ +
                                       "' has " + std::to_string(layer_sizes_.size()));
  }
  for (std::size_t n : layer_sizes_) {
    if (n == 0) throw Error(ErrorCode::kInput, "coverage layer sizes must be positive");
  }
  offsets_.push_back(0);
  for (std::size_t k = 0; k + 1 < layer_sizes_.size(); ++k) {
    offsets_.push_back(offsets_.back() + choose2(layer_sizes_[k]) * layer_sizes_[k + 1]);
  }
}

TripletRegistry TripletRegistry::for_model(const NetworkModel& model) {
  return TripletRegistry(model.name(), model.coverage_layer_sizes());
}

std::size_t TripletRegistry::closed_form_count(std::span<const std::size_t> layer_sizes) {
  std::size_t total = 0;
  for (std::size_t k = 1; k < layer_sizes.size(); ++k) total += choose2(layer_sizes[k - 1]) * layer_sizes[k];
  return total;
}

Triplet TripletRegistry::triplet(std::size_t index) const {
  if (index >= total_count()) throw Error(ErrorCode::kInvalidNeuron, "triplet index out of range");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
  const std::size_t k = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  const std::size_t n = layer_sizes_[k];
  const std::size_t nq = layer_sizes_[k + 1];
  std::size_t local = index - offsets_[k];
  const std::size_t q = local % nq;
  std::size_t rank = local / nq;
  std::size_t i = 0;
  while (rank >= n - 1 - i) {
    rank -= n - 1 - i;
    ++i;
  }
  return {k, i, i + 1 + rank, q};
}

std::size_t TripletRegistry::index_of(const Triplet& t) const {
  if (t.layer_pair >= layer_pair_count()) throw Error(ErrorCode::kInvalidNeuron, "triplet layer pair out of range");
  const std::size_t n = layer_sizes_[t.layer_pair];
  const std::size_t nq = layer_sizes_[t.layer_pair + 1];
  if (!(t.i < t.j) || t.j >= n || t.q >= nq) {
    throw Error(ErrorCode::kInvalidNeuron, "triplet ordinals out of range or not i < j");
  }
  return offsets_[t.layer_pair] + pair_rank(n, t.i, t.j) * nq + t.q;
}

std::uint64_t TripletRegistry::fingerprint() const {
  // FNV-1a over the name bytes and each size as 8 little-endian bytes.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (char c : model_name_) mix(static_cast<std::uint8_t>(c));
  mix(0);
  for (std::size_t n : layer_sizes_) {
    const auto v = static_cast<std::uint64_t>(n);
    for (int b = 0; b < 8; ++b) mix(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  return h;
}

CoverageState::CoverageState(TripletRegistry registry, double threshold)
    : registry_(std::move(registry)), threshold_(threshold), masks_(registry_.total_count(), 0) {
  if (std::isnan(threshold_)) throw Error(ErrorCode::kNumeric, "coverage threshold is NaN");
}

CoverageState CoverageState::restore(TripletRegistry registry, double threshold, std::uint64_t inputs_observed,
                                     std::vector<std::uint8_t> masks) {
  CoverageState s(std::move(registry), threshold);
  if (masks.size() != s.masks_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "restored mask array has " + std::to_string(masks.size()) +
                                               " entries, registry expects " + std::to_string(s.masks_.size()));
  }
  s.masks_ = std::move(masks);
  s.inputs_observed_ = inputs_observed;
  return s;
}

void CoverageState::observe(const ActivationTrace& trace) { observe(trace.values); }

void CoverageState::observe(std::span<const std::vector<double>> layer_values) {
  const auto& sizes = registry_.layer_sizes();
  if (layer_values.size() != sizes.size()) {
    throw Error(ErrorCode::kShapeMismatch, "trace has " + std::to_string(layer_values.size()) +
                                               " coverage layers, registry expects " + std::to_string(sizes.size()));
  }
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (layer_values[k].size() != sizes[k]) {
      throw Error(ErrorCode::kShapeMismatch, "coverage layer " + std::to_string(k) + " has " +
                                                 std::to_string(layer_values[k].size()) + " neurons, registry expects " +
                                                 std::to_string(sizes[k]));
    }
  }

  std::vector<std::uint8_t> lower_bits;
  std::vector<std::uint8_t> upper_bits;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const std::size_t n = sizes[k];
    const std::size_t nq = sizes[k + 1];
    lower_bits.resize(n);
    upper_bits.resize(nq);
    for (std::size_t a = 0; a < n; ++a) lower_bits[a] = layer_values[k][a] > threshold_ ? 1 : 0;
    // Bit for configuration (0, 0, q); shifted left by i*4 + j*2 below.
    for (std::size_t q = 0; q < nq; ++q) upper_bits[q] = layer_values[k + 1][q] > threshold_ ? 2 : 1;

    std::uint8_t* row = masks_.data() + registry_.pair_offset(k);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const unsigned shift = lower_bits[i] * 4u + lower_bits[j] * 2u;
        for (std::size_t q = 0; q < nq; ++q) row[q] |= static_cast<std::uint8_t>(upper_bits[q] << shift);
        row += nq;
      }
    }
  }
  ++inputs_observed_;
}

void CoverageState::merge(const CoverageState& other) {
  if (other.registry_.fingerprint() != registry_.fingerprint() || other.masks_.size() != masks_.size()) {
    throw Error(ErrorCode::kInput, "cannot merge coverage states of different registries");
  }
  for (std::size_t t = 0; t < masks_.size(); ++t) masks_[t] |= other.masks_[t];
  inputs_observed_ += other.inputs_observed_;
}

CoverageStats stats(const CoverageState& state) {
  CoverageStats s;
  s.total_triplets = state.masks().size();
  for (std::uint8_t m : state.masks()) {
    const std::uint16_t cells = kPairCells[m];
    s.covered_pair_cells += static_cast<std::size_t>(std::popcount(cells));
    s.observed_configs += static_cast<std::size_t>(std::popcount(m));
    if (cells == kAllPairCells) ++s.covered_triplets;
  }
  if (s.total_triplets > 0) {
    const auto total = static_cast<double>(s.total_triplets);
    s.triplet_coverage = static_cast<double>(s.covered_triplets) / total;
    s.pair_cell_coverage = static_cast<double>(s.covered_pair_cells) / (12.0 * total);
    s.full_config_coverage = static_cast<double>(s.observed_configs) / (8.0 * total);
  }
  return s;
}

std::optional<Config> best_target_config(std::uint8_t mask) {
  const std::uint16_t missing = static_cast<std::uint16_t>(~kPairCells[mask] & kAllPairCells);
  if (missing == 0) return std::nullopt;
  Config best = 0;
  int best_gain = 0;
  for (unsigned c = 0; c < 8; ++c) {
    if (mask & (1u << c)) continue;
    const int gain = std::popcount(static_cast<unsigned>(cells_of_config(c) & missing));
    if (gain > best_gain) {
      best_gain = gain;
      best = static_cast<Config>(c);
    }
  }
  return best;
}

std::vector<CoverageTarget> uncovered_targets(const CoverageState& state, std::uint64_t rng_seed, std::size_t count) {
  if (count == 0) throw Error(ErrorCode::kInput, "uncovered_targets needs count >= 1");
  std::vector<std::size_t> eligible;
  const auto masks = state.masks();
  for (std::size_t t = 0; t < masks.size(); ++t) {
    if (kPairCells[masks[t]] != kAllPairCells) eligible.push_back(t);
  }
  std::vector<std::size_t> chosen;
  chosen.reserve(std::min(count, eligible.size()));
  std::mt19937_64 rng(rng_seed);
  std::sample(eligible.begin(), eligible.end(), std::back_inserter(chosen), count, rng);
  // std::sample keeps registry order; shuffle so a prefix is also uniform.
  std::shuffle(chosen.begin(), chosen.end(), rng);

  std::vector<CoverageTarget> out;
  out.reserve(chosen.size());
  for (std::size_t t : chosen) {
    out.push_back({state.registry().triplet(t), t, *best_target_config(masks[t])});
  }
  return out;
}

NeuronCoverage::NeuronCoverage(std::vector<std::size_t> layer_sizes, double threshold)
    : layer_sizes_(std::move(layer_sizes)), threshold_(threshold) {
  for (std::size_t n : layer_sizes_) {
    fired_.emplace_back(n, false);
    total_ += n;
  }
}

void NeuronCoverage::observe(const ActivationTrace& trace) {
  if (trace.values.size() != layer_sizes_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "trace coverage layers do not match the neuron-coverage tracker");
  }
  for (std::size_t k = 0; k < layer_sizes_.size(); ++k) {
    if (trace.values[k].size() != layer_sizes_[k]) {
      throw Error(ErrorCode::kShapeMismatch, "trace layer " + std::to_string(k) + " size mismatch");
    }
    for (std::size_t n = 0; n < layer_sizes_[k]; ++n) {
      if (!fired_[k][n] && trace.values[k][n] > threshold_) {
        fired_[k][n] = true;
        ++covered_;
      }
    }
  }
  ++inputs_observed_;
}

double NeuronCoverage::fraction() const {
  return total_ == 0 ? 0.0 : static_cast<double>(covered_) / static_cast<double>(total_);
}

double neuron_coverage(std::span<const ActivationTrace> traces, double threshold) {
  if (traces.empty()) throw Error(ErrorCode::kInput, "neuron coverage needs at least one trace");
  std::vector<std::size_t> sizes;
  for (const auto& v : traces.front().values) sizes.push_back(v.size());
  NeuronCoverage nc(std::move(sizes), threshold);
  for (const auto& t : traces) nc.observe(t);
  return nc.fraction();
}

}  // namespace dnncov
