#include "dnncov/report.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "dnncov/error.hpp"

namespace dnncov {

namespace {

using nlohmann::json;

constexpr std::string_view kReportTag = "dnncov-report";

std::string_view to_string(StepRule r) { return r == StepRule::kSign ? "sign" : "scaled"; }
std::string_view to_string(Retarget r) { return r == Retarget::kPerSeed ? "per-seed" : "per-iteration"; }

StepRule parse_step_rule(const std::string& s) {
  if (s == "sign") return StepRule::kSign;
  if (s == "scaled") return StepRule::kScaled;
  throw Error(ErrorCode::kParse, "step_rule must be \"sign\" or \"scaled\", got \"" + s + "\"");
}

Retarget parse_retarget(const std::string& s) {
  if (s == "per-seed") return Retarget::kPerSeed;
  if (s == "per-iteration") return Retarget::kPerIteration;
  throw Error(ErrorCode::kParse, "retarget must be \"per-seed\" or \"per-iteration\", got \"" + s + "\"");
}

template <typename T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

json config_to_json(const CampaignConfig& c) {
  return {
      {"models", c.model_paths},
      {"images", c.images_path},
      {"labels", c.labels_path},
      {"mode", std::string(to_string(c.mode))},
      {"seeds", c.seed_count},
      {"rng_seed", c.rng_seed},
      {"threshold", c.gen.threshold},
      {"lambda1", c.gen.lambda1},
      {"lambda2", c.gen.lambda2},
      {"step_size", c.gen.step_size},
      {"max_iters", c.gen.max_iterations},
      {"step_rule", std::string(to_string(c.gen.step_rule))},
      {"retarget", std::string(to_string(c.gen.retarget))},
      {"out", c.report_path},
      {"oracle", c.oracle},
      {"average", c.average_models},
      {"dump_dir", c.dump_dir},
      {"snapshot_dir", c.snapshot_dir},
  };
}

std::uint64_t count_value(const json& j, const char* key, std::uint64_t dflt) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number_unsigned()) {
    throw Error(ErrorCode::kParse, std::string("config key '") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

CampaignConfig config_from_json(const json& j) {
  static const std::set<std::string> known = {
      "models", "images",   "labels",    "mode",      "seeds",  "rng_seed", "threshold", "lambda1",  "lambda2",
      "step_size", "max_iters", "step_rule", "retarget", "out", "oracle", "average", "dump_dir", "snapshot_dir"};
  if (!j.is_object()) throw Error(ErrorCode::kParse, "config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error(ErrorCode::kParse, "unknown config key '" + key + "'");
  }
  CampaignConfig c;
  c.model_paths = j.value("models", c.model_paths);
  c.images_path = j.value("images", c.images_path);
  c.labels_path = j.value("labels", c.labels_path);
  if (j.contains("mode")) c.mode = parse_campaign_mode(j.at("mode").get<std::string>());
  c.seed_count = count_value(j, "seeds", c.seed_count);
  c.rng_seed = count_value(j, "rng_seed", c.rng_seed);
  c.gen.threshold = j.value("threshold", c.gen.threshold);
  c.gen.lambda1 = j.value("lambda1", c.gen.lambda1);
  c.gen.lambda2 = j.value("lambda2", c.gen.lambda2);
  c.gen.step_size = j.value("step_size", c.gen.step_size);
  c.gen.max_iterations = count_value(j, "max_iters", c.gen.max_iterations);
  if (j.contains("step_rule")) c.gen.step_rule = parse_step_rule(j.at("step_rule").get<std::string>());
  if (j.contains("retarget")) c.gen.retarget = parse_retarget(j.at("retarget").get<std::string>());
  c.gen.rng_seed = c.rng_seed;
  c.report_path = j.value("out", c.report_path);
  c.oracle = j.value("oracle", c.oracle);
  c.average_models = j.value("average", c.average_models);
  c.dump_dir = j.value("dump_dir", c.dump_dir);
  c.snapshot_dir = j.value("snapshot_dir", c.snapshot_dir);
  return c;
}

json stats_to_json(const CoverageStats& s) {
  return {
      {"triplet_coverage", s.triplet_coverage},
      {"pair_cell_coverage", s.pair_cell_coverage},
      {"full_config_coverage", s.full_config_coverage},
      {"total_triplets", s.total_triplets},
      {"covered_triplets", s.covered_triplets},
      {"covered_pair_cells", s.covered_pair_cells},
      {"observed_configs", s.observed_configs},
  };
}

CoverageStats stats_from_json(const json& j) {
  CoverageStats s;
  s.triplet_coverage = j.at("triplet_coverage").get<double>();
  s.pair_cell_coverage = j.at("pair_cell_coverage").get<double>();
  s.full_config_coverage = j.at("full_config_coverage").get<double>();
  s.total_triplets = j.at("total_triplets").get<std::size_t>();
  s.covered_triplets = j.at("covered_triplets").get<std::size_t>();
  s.covered_pair_cells = j.at("covered_pair_cells").get<std::size_t>();
  s.observed_configs = j.at("observed_configs").get<std::size_t>();
  return s;
}

json report_to_json(const CampaignReport& r) {
  json models = json::array();
  for (const auto& m : r.models) {
    models.push_back({
        {"name", m.name},
        {"path", m.path},
        {"coverage_layer_sizes", m.coverage_layer_sizes},
        {"triplet_count", m.triplet_count},
        {"initial", stats_to_json(m.initial)},
        {"final", stats_to_json(m.final_stats)},
        {"neuron_coverage", m.neuron_coverage},
        {"neuron_coverage_curve", m.neuron_coverage_curve},
        {"triplet_coverage_curve", m.triplet_coverage_curve},
    });
  }
  json average = nullptr;
  if (r.average) {
    average = {
        {"triplet_coverage", r.average->triplet_coverage},
        {"pair_cell_coverage", r.average->pair_cell_coverage},
        {"full_config_coverage", r.average->full_config_coverage},
        {"neuron_coverage", r.average->neuron_coverage},
    };
  }
  return {
      {"schema", std::string(kReportTag)},
      {"schema_version", r.schema_version},
      {"tool_version", r.tool_version},
      {"mode", std::string(to_string(r.mode))},
      {"config", config_to_json(r.config)},
      {"models", std::move(models)},
      {"inputs_tested", r.inputs_tested},
      {"corner_cases", r.corner_cases},
      {"adversarial_ratio", optional_to_json(r.adversarial_ratio)},
      {"average", std::move(average)},
      {"summary",
       {
           {"coverage_for_random_inputs", optional_to_json(r.summary.coverage_for_random_inputs)},
           {"guided_coverage", optional_to_json(r.summary.guided_coverage)},
           {"corner_case_behaviors", optional_to_json(r.summary.corner_case_behaviors)},
           {"adversarial_ratio", optional_to_json(r.summary.adversarial_ratio)},
       }},
      {"timings",
       {
           {"load_seconds", r.timings.load_seconds},
           {"run_seconds", r.timings.run_seconds},
           {"coverage_update_seconds_total", r.timings.coverage_update_seconds_total},
           {"coverage_update_seconds_mean", r.timings.coverage_update_seconds_mean},
           {"total_seconds", r.timings.total_seconds},
       }},
  };
}

CampaignReport report_from_json(const json& j) {
  if (j.value("schema", std::string()) != kReportTag) throw Error(ErrorCode::kParse, "not a dnncov report");
  CampaignReport r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != kReportSchemaVersion) {
    throw Error(ErrorCode::kParse, "unsupported report schema version " + std::to_string(r.schema_version));
  }
  r.tool_version = j.at("tool_version").get<std::string>();
  r.mode = parse_campaign_mode(j.at("mode").get<std::string>());
  r.config = config_from_json(j.at("config"));
  for (const auto& m : j.at("models")) {
    ModelReport mr;
    mr.name = m.at("name").get<std::string>();
    mr.path = m.at("path").get<std::string>();
    mr.coverage_layer_sizes = m.at("coverage_layer_sizes").get<std::vector<std::size_t>>();
    mr.triplet_count = m.at("triplet_count").get<std::size_t>();
    mr.initial = stats_from_json(m.at("initial"));
    mr.final_stats = stats_from_json(m.at("final"));
    mr.neuron_coverage = m.at("neuron_coverage").get<double>();
    mr.neuron_coverage_curve = m.at("neuron_coverage_curve").get<std::vector<double>>();
    mr.triplet_coverage_curve = m.at("triplet_coverage_curve").get<std::vector<double>>();
    r.models.push_back(std::move(mr));
  }
  r.inputs_tested = j.at("inputs_tested").get<std::size_t>();
  r.corner_cases = j.at("corner_cases").get<std::size_t>();
  r.adversarial_ratio = optional_from_json<double>(j.at("adversarial_ratio"));
  if (const json& a = j.at("average"); !a.is_null()) {
    r.average = AverageReport{a.at("triplet_coverage").get<double>(), a.at("pair_cell_coverage").get<double>(),
                              a.at("full_config_coverage").get<double>(), a.at("neuron_coverage").get<double>()};
  }
  const json& s = j.at("summary");
  r.summary.coverage_for_random_inputs = optional_from_json<double>(s.at("coverage_for_random_inputs"));
  r.summary.guided_coverage = optional_from_json<double>(s.at("guided_coverage"));
  r.summary.corner_case_behaviors = optional_from_json<std::size_t>(s.at("corner_case_behaviors"));
  r.summary.adversarial_ratio = optional_from_json<double>(s.at("adversarial_ratio"));
  const json& t = j.at("timings");
  r.timings.load_seconds = t.at("load_seconds").get<double>();
  r.timings.run_seconds = t.at("run_seconds").get<double>();
  r.timings.coverage_update_seconds_total = t.at("coverage_update_seconds_total").get<double>();
  r.timings.coverage_update_seconds_mean = t.at("coverage_update_seconds_mean").get<double>();
  r.timings.total_seconds = t.at("total_seconds").get<double>();
  return r;
}

std::string percent(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", *v * 100.0);
  return buf;
}

}  // namespace

std::string config_to_string(const CampaignConfig& config) { return config_to_json(config).dump(2) + "\n"; }

CampaignConfig parse_config(std::string_view text) {
  try {
    return config_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
}

CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string report_to_string(const CampaignReport& report) { return report_to_json(report).dump(2) + "\n"; }

CampaignReport parse_report(std::string_view text) {
  try {
    return report_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("report: ") + e.what());
  }
}

void write_report(const CampaignReport& report, const std::filesystem::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw Error(ErrorCode::kIo, "report directory does not exist: " + parent.string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write report " + path.string());
  out << report_to_string(report);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

CampaignReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open report " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

std::string summary_table(const CampaignReport& r) {
  std::ostringstream out;
  char line[160];
  out << "mode: " << to_string(r.mode) << ", inputs tested: " << r.inputs_tested << "\n\n";
  std::snprintf(line, sizeof line, "%-44s %s\n", "Metric", "Result");
  out << line;
  std::snprintf(line, sizeof line, "%-44s %s\n", "Coverage for random inputs", percent(r.summary.coverage_for_random_inputs).c_str());
  out << line;
  std::snprintf(line, sizeof line, "%-44s %s\n", "Guided coverage", percent(r.summary.guided_coverage).c_str());
  out << line;
  std::snprintf(line, sizeof line, "%-44s %s\n", "Corner case behaviors found",
                r.summary.corner_case_behaviors ? std::to_string(*r.summary.corner_case_behaviors).c_str() : "n/a");
  out << line;
  std::snprintf(line, sizeof line, "%-44s %s\n", "Adversarial ratio", percent(r.summary.adversarial_ratio).c_str());
  out << line << "\n";

  std::snprintf(line, sizeof line, "%-20s %10s %10s %10s %10s %10s\n", "model", "triplets", "triplet", "pair-cell",
                "config", "neuron");
  out << line;
  for (const auto& m : r.models) {
    std::snprintf(line, sizeof line, "%-20s %10zu %10s %10s %10s %10s\n", m.name.c_str(), m.triplet_count,
                  percent(m.final_stats.triplet_coverage).c_str(), percent(m.final_stats.pair_cell_coverage).c_str(),
                  percent(m.final_stats.full_config_coverage).c_str(), percent(m.neuron_coverage).c_str());
    out << line;
  }
  if (r.average) {
    std::snprintf(line, sizeof line, "%-20s %10s %10s %10s %10s %10s\n", "average", "", percent(r.average->triplet_coverage).c_str(),
                  percent(r.average->pair_cell_coverage).c_str(), percent(r.average->full_config_coverage).c_str(),
                  percent(r.average->neuron_coverage).c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "\nmean coverage update per input: %.6f s\n", r.timings.coverage_update_seconds_mean);
  out << line;
  return out.str();
}

}  // namespace dnncov
