#include "dnncov/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "dnncov/engine.hpp"
#include "dnncov/error.hpp"
#include "dnncov/model_io.hpp"
#include "dnncov/oracle.hpp"
#include "dnncov/snapshot.hpp"

#ifndef DNNCOV_VERSION
#define DNNCOV_VERSION "0.0.0"
#endif

namespace dnncov {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::filesystem::path snapshot_path(const CampaignConfig& config, const NetworkModel& model) {
  return std::filesystem::path(config.snapshot_dir) / (model.name() + ".tcov");
}

std::vector<CoverageState> initial_states(const CampaignConfig& config, const CampaignInputs& in) {
  std::vector<CoverageState> states;
  for (const auto& model : in.models) {
    TripletRegistry registry = TripletRegistry::for_model(model);
    if (!config.snapshot_dir.empty() && std::filesystem::exists(snapshot_path(config, model))) {
      CoverageState s = load_snapshot(snapshot_path(config, model), registry);
      if (s.threshold() != config.gen.threshold) {
        throw Error(ErrorCode::kInput, "snapshot for '" + model.name() + "' was recorded with threshold " +
                                           std::to_string(s.threshold()));
      }
      states.push_back(std::move(s));
    } else {
      states.emplace_back(std::move(registry), config.gen.threshold);
    }
  }
  return states;
}

void persist_states(const CampaignConfig& config, const CampaignInputs& in, const std::vector<CoverageState>& states) {
  if (config.snapshot_dir.empty()) return;
  std::filesystem::create_directories(config.snapshot_dir);
  for (std::size_t m = 0; m < states.size(); ++m) save_snapshot(states[m], snapshot_path(config, in.models[m]));
}

std::optional<std::size_t> truth_of(const Dataset& ds, std::size_t index) {
  if (!ds.has_labels()) return std::nullopt;
  return ds.labels[index];
}

bool oracle_applicable(const Oracle& oracle, const CampaignInputs& in) {
  return in.models.size() >= oracle.min_models() && (!oracle.needs_ground_truth() || in.dataset.has_labels());
}

Tensor seed_image(const CampaignInputs& in, std::size_t index) {
  return in.dataset.images.at(index).reshaped(in.models.front().input_shape());
}

// Shared bookkeeping for every mode.
class ReportBuilder {
 public:
  ReportBuilder(const CampaignConfig& config, const CampaignInputs& in, const std::vector<CoverageState>& states)
      : config_(config), in_(in) {
    report_.schema_version = 1;
    report_.tool_version = std::string(tool_version());
    report_.mode = config.mode;
    report_.config = config;
    report_.config.gen.rng_seed = config.rng_seed;
    for (std::size_t m = 0; m < in.models.size(); ++m) {
      ModelReport mr;
      mr.name = in.models[m].name();
      mr.path = m < in.model_paths.size() ? in.model_paths[m] : std::string();
      mr.coverage_layer_sizes = in.models[m].coverage_layer_sizes();
      mr.triplet_count = states[m].registry().total_count();
      mr.initial = stats(states[m]);
      report_.models.push_back(std::move(mr));
      neuron_.emplace_back(in.models[m], config.gen.threshold);
    }
  }

  void record_traces(const std::vector<ActivationTrace>& traces) {
    for (std::size_t m = 0; m < traces.size(); ++m) neuron_[m].observe(traces[m]);
    ++report_.inputs_tested;
  }

  void record_verdict(const OracleVerdict& v) {
    verdicts_.push_back(v);
    if (v.is_corner_case) ++report_.corner_cases;
  }

  void record_curves(const std::vector<CoverageState>& states) {
    for (std::size_t m = 0; m < states.size(); ++m) {
      report_.models[m].neuron_coverage_curve.push_back(neuron_[m].fraction());
      report_.models[m].triplet_coverage_curve.push_back(stats(states[m]).triplet_coverage);
    }
  }

  void add_update_time(double s) { report_.timings.coverage_update_seconds_total += s; }

  CampaignReport finish(const std::vector<CoverageState>& states, double run_seconds) {
    for (std::size_t m = 0; m < states.size(); ++m) {
      report_.models[m].final_stats = stats(states[m]);
      report_.models[m].neuron_coverage = neuron_[m].fraction();
    }
    if (!verdicts_.empty()) report_.adversarial_ratio = adversarial_ratio(verdicts_);

    AverageReport avg;
    for (const auto& mr : report_.models) {
      avg.triplet_coverage += mr.final_stats.triplet_coverage;
      avg.pair_cell_coverage += mr.final_stats.pair_cell_coverage;
      avg.full_config_coverage += mr.final_stats.full_config_coverage;
      avg.neuron_coverage += mr.neuron_coverage;
    }
    const auto n = static_cast<double>(report_.models.size());
    avg.triplet_coverage /= n;
    avg.pair_cell_coverage /= n;
    avg.full_config_coverage /= n;
    avg.neuron_coverage /= n;
    if (config_.average_models) report_.average = avg;

    const double headline =
        config_.average_models ? avg.triplet_coverage : report_.models.front().final_stats.triplet_coverage;
    if (config_.mode == CampaignMode::kGuidedGenerate) {
      report_.summary.guided_coverage = headline;
    } else {
      report_.summary.coverage_for_random_inputs = headline;
    }
    if (!verdicts_.empty()) report_.summary.corner_case_behaviors = report_.corner_cases;
    report_.summary.adversarial_ratio = report_.adversarial_ratio;

    report_.timings.run_seconds = run_seconds;
    if (report_.inputs_tested > 0) {
      report_.timings.coverage_update_seconds_mean =
          report_.timings.coverage_update_seconds_total / static_cast<double>(report_.inputs_tested);
    }
    persist_states(config_, in_, states);
    return report_;
  }

 private:
  const CampaignConfig& config_;
  const CampaignInputs& in_;
  CampaignReport report_;
  std::vector<NeuronCoverage> neuron_;
  std::vector<OracleVerdict> verdicts_;
};

// Random evaluation and the neuron-coverage baseline share one loop; the
// baseline additionally records per-input curves.
void check_inputs(const CampaignConfig& config, const CampaignInputs& in) {
  config.validate();
  if (in.models.empty()) throw Error(ErrorCode::kInput, "at least one model is required");
}

CampaignReport run_unguided(const CampaignConfig& config, const CampaignInputs& in, bool curves) {
  check_inputs(config, in);
  const auto t0 = Clock::now();
  std::vector<CoverageState> states = initial_states(config, in);
  ReportBuilder builder(config, in, states);
  const auto oracle = make_oracle(config.oracle);
  const bool judge = oracle_applicable(*oracle, in);

  for (std::size_t index : sample_seeds(in.dataset.size(), config.seed_count, config.rng_seed)) {
    const Tensor x = seed_image(in, index);
    std::vector<ActivationTrace> traces;
    traces.reserve(in.models.size());
    for (const auto& m : in.models) traces.push_back(forward(m, x));

    const auto tu = Clock::now();
    for (std::size_t m = 0; m < states.size(); ++m) states[m].observe(traces[m]);
    builder.add_update_time(seconds_since(tu));

    builder.record_traces(traces);
    if (judge) builder.record_verdict(oracle->judge(traces, truth_of(in.dataset, index)));
    if (curves) builder.record_curves(states);
  }
  return builder.finish(states, seconds_since(t0));
}

}  // namespace

std::string_view tool_version() { return DNNCOV_VERSION; }

std::string_view to_string(CampaignMode mode) {
  switch (mode) {
    case CampaignMode::kRandomEval: return "random-eval";
    case CampaignMode::kGuidedGenerate: return "guided-generate";
    case CampaignMode::kNeuronCoverageBaseline: return "neuron-coverage-baseline";
  }
  return "unknown";
}

CampaignMode parse_campaign_mode(std::string_view name) {
  if (name == "random-eval") return CampaignMode::kRandomEval;
  if (name == "guided-generate") return CampaignMode::kGuidedGenerate;
  if (name == "neuron-coverage-baseline") return CampaignMode::kNeuronCoverageBaseline;
  throw Error(ErrorCode::kUnsupported, "unknown campaign mode '" + std::string(name) + "'");
}

void CampaignConfig::validate() const {
  gen.validate();
  const auto o = make_oracle(oracle);
  if (!model_paths.empty() && mode == CampaignMode::kGuidedGenerate && model_paths.size() < o->min_models()) {
    throw Error(ErrorCode::kInput, "guided generation with the " + std::string(o->name()) +
                                       " oracle needs at least " + std::to_string(o->min_models()) + " models");
  }
  if (o->needs_ground_truth() && labels_path.empty()) {
    throw Error(ErrorCode::kInput, "the labels oracle needs a labels file");
  }
}

CampaignInputs load_inputs(const CampaignConfig& config) {
  if (config.model_paths.empty()) throw Error(ErrorCode::kInput, "at least one model is required");
  if (config.images_path.empty()) throw Error(ErrorCode::kInput, "an images file is required");
  CampaignInputs in;
  for (const auto& p : config.model_paths) {
    in.models.push_back(load_model(p));
    in.model_paths.push_back(p);
  }
  if (config.labels_path.empty()) {
    in.dataset.images = read_idx_images(config.images_path);
  } else {
    in.dataset = load_idx(config.images_path, config.labels_path);
  }
  const Shape& shape = in.models.front().input_shape();
  for (const auto& m : in.models) {
    if (m.input_shape() != shape) {
      throw Error(ErrorCode::kShapeMismatch, "model '" + m.name() + "' input shape " +
                                                 shape_to_string(m.input_shape()) + " differs from " +
                                                 shape_to_string(shape));
    }
  }
  if (!in.dataset.images.empty() && in.dataset.images.front().size() != element_count(shape)) {
    throw Error(ErrorCode::kShapeMismatch, "dataset images have " + std::to_string(in.dataset.images.front().size()) +
                                               " pixels, models expect " + shape_to_string(shape));
  }
  return in;
}

std::vector<std::size_t> sample_seeds(std::size_t dataset_size, std::size_t seed_count, std::uint64_t rng_seed) {
  if (seed_count > dataset_size) {
    throw Error(ErrorCode::kInput, "requested " + std::to_string(seed_count) + " seeds from a dataset of " +
                                       std::to_string(dataset_size));
  }
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(rng_seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(seed_count);
  return order;
}

CampaignReport run_random_eval(const CampaignConfig& config, const CampaignInputs& inputs) {
  return run_unguided(config, inputs, false);
}

CampaignReport run_baseline(const CampaignConfig& config, const CampaignInputs& inputs) {
  return run_unguided(config, inputs, true);
}

CampaignReport run_guided(const CampaignConfig& config, const CampaignInputs& in) {
  check_inputs(config, in);
  const auto t0 = Clock::now();
  std::vector<CoverageState> states = initial_states(config, in);
  ReportBuilder builder(config, in, states);
  const auto oracle = make_oracle(config.oracle);
  if (!oracle_applicable(*oracle, in)) {
    throw Error(ErrorCode::kInput, "the " + std::string(oracle->name()) + " oracle needs at least " +
                                       std::to_string(oracle->min_models()) + " models" +
                                       (oracle->needs_ground_truth() ? " and dataset labels" : ""));
  }
  GenParams params = config.gen;
  params.rng_seed = config.rng_seed;
  if (!config.dump_dir.empty()) std::filesystem::create_directories(config.dump_dir);

  GuidedGenerator gen(in.models, states, *oracle, params);
  std::size_t n = 0;
  for (std::size_t index : sample_seeds(in.dataset.size(), config.seed_count, config.rng_seed)) {
    const GenerationRecord rec = gen.step(seed_image(in, index), index, truth_of(in.dataset, index));
    builder.add_update_time(rec.coverage_update_seconds);
    builder.record_traces(rec.traces);
    builder.record_verdict(rec.verdict);
    if (!config.dump_dir.empty()) {
      Tensor img = rec.candidate.input;
      if (img.rank() == 1) img = img.reshaped({1, img.size()});
      const auto file = std::filesystem::path(config.dump_dir) /
                        ("candidate_" + std::to_string(n) + "_seed" + std::to_string(index) + ".idx");
      write_idx_images(file, std::span<const Tensor>(&img, 1));
    }
    ++n;
  }
  return builder.finish(states, seconds_since(t0));
}

CampaignReport run_campaign(const CampaignConfig& config) {
  config.validate();
  const auto t0 = Clock::now();
  const CampaignInputs inputs = load_inputs(config);
  const double load = seconds_since(t0);
  CampaignReport report;
  switch (config.mode) {
    case CampaignMode::kRandomEval: report = run_random_eval(config, inputs); break;
    case CampaignMode::kGuidedGenerate: report = run_guided(config, inputs); break;
    case CampaignMode::kNeuronCoverageBaseline: report = run_baseline(config, inputs); break;
  }
  report.timings.load_seconds = load;
  report.timings.total_seconds = seconds_since(t0);
  return report;
}

}  // namespace dnncov
