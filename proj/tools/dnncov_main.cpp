// dnncov: batch coverage / generation campaigns over feed-forward models.
//
//   dnncov coverage --models a.json,b.json --images imgs.idx --seeds 10 --out r.json
//   dnncov generate --models a.json,b.json,c.json --images imgs.idx --seeds 50 --out r.json
//   dnncov baseline --models a.json --images imgs.idx --seeds 25 --out r.json
//   dnncov report r.json

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dnncov/campaign.hpp"
#include "dnncov/error.hpp"
#include "dnncov/report.hpp"

namespace {

struct Overrides {
  std::vector<std::string> models;
  std::string images;
  std::string labels;
  std::optional<std::size_t> seeds;
  std::optional<std::uint64_t> rng_seed;
  std::optional<double> threshold;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<double> step_size;
  std::optional<std::size_t> max_iters;
  std::string step_rule;
  std::string retarget;
  std::string out;
  std::string config;
  std::string oracle;
  std::string dump_dir;
  std::string snapshot_dir;
  bool average = false;
};

void add_campaign_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--models", o.models, "Model files (comma separated or repeated)")->delimiter(',');
  cmd->add_option("--images", o.images, "IDX image file");
  cmd->add_option("--labels", o.labels, "IDX label file");
  cmd->add_option("--seeds", o.seeds, "Number of dataset inputs to process");
  cmd->add_option("--rng-seed", o.rng_seed, "Seed for input sampling and target selection");
  cmd->add_option("--threshold", o.threshold, "Activation threshold (neuron fired iff value > threshold)");
  cmd->add_option("--lambda1", o.lambda1, "Target-model weight in the differential term");
  cmd->add_option("--lambda2", o.lambda2, "Coverage term weight");
  cmd->add_option("--step-size", o.step_size, "Brightness step per iteration");
  cmd->add_option("--max-iters", o.max_iters, "Gradient iterations per seed");
  cmd->add_option("--step-rule", o.step_rule, "sign | scaled")->check(CLI::IsMember({"sign", "scaled"}));
  cmd->add_option("--retarget", o.retarget, "per-seed | per-iteration")
      ->check(CLI::IsMember({"per-seed", "per-iteration"}));
  cmd->add_option("--oracle", o.oracle, "differential | labels")->check(CLI::IsMember({"differential", "labels"}));
  cmd->add_option("--out", o.out, "Report path");
  cmd->add_option("--config", o.config, "JSON config file; flags override its values");
  cmd->add_option("--dump-dir", o.dump_dir, "Write every generated candidate as an IDX image here");
  cmd->add_option("--snapshot-dir", o.snapshot_dir, "Resume from and save coverage snapshots here");
  cmd->add_flag("--average", o.average, "Average coverage metrics across models in the summary");
}

dnncov::CampaignConfig resolve(const Overrides& o, dnncov::CampaignMode mode) {
  dnncov::CampaignConfig c = o.config.empty() ? dnncov::CampaignConfig{} : dnncov::load_config(o.config);
  c.mode = mode;
  if (!o.models.empty()) c.model_paths = o.models;
  if (!o.images.empty()) c.images_path = o.images;
  if (!o.labels.empty()) c.labels_path = o.labels;
  if (o.seeds) c.seed_count = *o.seeds;
  if (o.rng_seed) c.rng_seed = *o.rng_seed;
  if (o.threshold) c.gen.threshold = *o.threshold;
  if (o.lambda1) c.gen.lambda1 = *o.lambda1;
  if (o.lambda2) c.gen.lambda2 = *o.lambda2;
  if (o.step_size) c.gen.step_size = *o.step_size;
  if (o.max_iters) c.gen.max_iterations = *o.max_iters;
  if (!o.step_rule.empty()) c.gen.step_rule = o.step_rule == "sign" ? dnncov::StepRule::kSign : dnncov::StepRule::kScaled;
  if (!o.retarget.empty()) {
    c.gen.retarget = o.retarget == "per-seed" ? dnncov::Retarget::kPerSeed : dnncov::Retarget::kPerIteration;
  }
  if (!o.oracle.empty()) c.oracle = o.oracle;
  if (!o.out.empty()) c.report_path = o.out;
  if (!o.dump_dir.empty()) c.dump_dir = o.dump_dir;
  if (!o.snapshot_dir.empty()) c.snapshot_dir = o.snapshot_dir;
  if (o.average) c.average_models = true;
  c.gen.rng_seed = c.rng_seed;
  return c;
}

int run(const Overrides& o, dnncov::CampaignMode mode) {
  const dnncov::CampaignConfig config = resolve(o, mode);
  if (config.report_path.empty()) throw dnncov::Error(dnncov::ErrorCode::kInput, "--out is required");
  const auto parent = std::filesystem::path(config.report_path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw dnncov::Error(dnncov::ErrorCode::kIo, "report directory does not exist: " + parent.string());
  }
  const dnncov::CampaignReport report = dnncov::run_campaign(config);
  dnncov::write_report(report, config.report_path);
  std::cout << dnncov::summary_table(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dnncov: triplet 2-way coverage, guided generation and differential testing for feed-forward nets"};
  app.set_version_flag("--version", std::string(dnncov::tool_version()));
  app.require_subcommand(1);

  Overrides coverage_opts, generate_opts, baseline_opts;
  auto* coverage = app.add_subcommand("coverage", "Coverage of randomly sampled dataset inputs");
  add_campaign_flags(coverage, coverage_opts);
  auto* generate = app.add_subcommand("generate", "Guided test-input generation with the differential oracle");
  add_campaign_flags(generate, generate_opts);
  auto* baseline = app.add_subcommand("baseline", "Neuron coverage vs triplet coverage, input by input");
  add_campaign_flags(baseline, baseline_opts);

  std::string report_in;
  auto* report = app.add_subcommand("report", "Print the summary table of a report file");
  report->add_option("report", report_in, "Report JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*coverage) return run(coverage_opts, dnncov::CampaignMode::kRandomEval);
    if (*generate) return run(generate_opts, dnncov::CampaignMode::kGuidedGenerate);
    if (*baseline) return run(baseline_opts, dnncov::CampaignMode::kNeuronCoverageBaseline);
    if (*report) {
      std::cout << dnncov::summary_table(dnncov::read_report(report_in));
      return 0;
    }
  } catch (const dnncov::Error& e) {
    std::cerr << "dnncov: " << e.what() << "\n";
    return e.code() == dnncov::ErrorCode::kIo ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "dnncov: unexpected failure: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
