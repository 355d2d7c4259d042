#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dnncov/coverage.hpp"
#include "dnncov/guided.hpp"
#include "dnncov/idx.hpp"
#include "dnncov/model.hpp"

namespace dnncov {

std::string_view tool_version();

enum class CampaignMode { kRandomEval, kGuidedGenerate, kNeuronCoverageBaseline };

std::string_view to_string(CampaignMode mode);
CampaignMode parse_campaign_mode(std::string_view name);

struct CampaignConfig {
  std::vector<std::string> model_paths;
  std::string images_path;
  std::string labels_path;  // optional unless the labels oracle is used
  CampaignMode mode = CampaignMode::kRandomEval;
  std::size_t seed_count = 10;
  std::uint64_t rng_seed = 0;
  GenParams gen;  // gen.threshold is also the coverage threshold
  std::string report_path;
  std::string oracle = "differential";
  bool average_models = false;
  std::string dump_dir;      // guided mode: one IDX file per candidate
  std::string snapshot_dir;  // resume/persist coverage per model

  /// Throws kInput describing the first violated constraint.
  void validate() const;

  friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

/// Config file (JSON, see docs/report_schema.md for keys).
CampaignConfig load_config(const std::filesystem::path& path);
CampaignConfig parse_config(std::string_view text);

struct ModelReport {
  std::string name;
  std::string path;
  std::vector<std::size_t> coverage_layer_sizes;
  std::size_t triplet_count = 0;
  CoverageStats initial;
  CoverageStats final_stats;
  double neuron_coverage = 0.0;
  std::vector<double> neuron_coverage_curve;  // baseline mode: after each input
  std::vector<double> triplet_coverage_curve;

  friend bool operator==(const ModelReport&, const ModelReport&) = default;
};

struct AverageReport {
  double triplet_coverage = 0.0;
  double pair_cell_coverage = 0.0;
  double full_config_coverage = 0.0;
  double neuron_coverage = 0.0;
  friend bool operator==(const AverageReport&, const AverageReport&) = default;
};

/// The four headline metrics in the shape of the evaluation table.
struct ReportSummary {
  std::optional<double> coverage_for_random_inputs;
  std::optional<double> guided_coverage;
  std::optional<std::size_t> corner_case_behaviors;
  std::optional<double> adversarial_ratio;
  friend bool operator==(const ReportSummary&, const ReportSummary&) = default;
};

struct Timings {
  double load_seconds = 0.0;
  double run_seconds = 0.0;
  double coverage_update_seconds_total = 0.0;
  double coverage_update_seconds_mean = 0.0;  // per input, all models
  double total_seconds = 0.0;
  friend bool operator==(const Timings&, const Timings&) = default;
};

struct CampaignReport {
  int schema_version = 1;
  std::string tool_version;
  CampaignMode mode = CampaignMode::kRandomEval;
  CampaignConfig config;
  std::vector<ModelReport> models;
  std::size_t inputs_tested = 0;
  std::size_t corner_cases = 0;
  std::optional<double> adversarial_ratio;
  std::optional<AverageReport> average;
  ReportSummary summary;
  Timings timings;

  friend bool operator==(const CampaignReport&, const CampaignReport&) = default;
};

/// Loaded campaign inputs; all models must share one input shape.
struct CampaignInputs {
  std::vector<NetworkModel> models;
  std::vector<std::string> model_paths;
  Dataset dataset;
};

CampaignInputs load_inputs(const CampaignConfig& config);

/// `seed_count` distinct dataset ordinals, uniformly shuffled under `rng_seed`.
std::vector<std::size_t> sample_seeds(std::size_t dataset_size, std::size_t seed_count, std::uint64_t rng_seed);

CampaignReport run_random_eval(const CampaignConfig& config, const CampaignInputs& inputs);
CampaignReport run_guided(const CampaignConfig& config, const CampaignInputs& inputs);
CampaignReport run_baseline(const CampaignConfig& config, const CampaignInputs& inputs);

/// Loads files, dispatches on config.mode and fills load/total timings. Does
/// not write the report.
CampaignReport run_campaign(const CampaignConfig& config);

}  // namespace dnncov
