// Acceptance suite: one line per criterion, nonzero exit if a primary one fails.
//
// Criteria 8-10 need exported trained models and run only when these are set:
//   DNNCOV_PARITY_MANIFESTS  comma-separated parity manifest paths
//   DNNCOV_TRAINED_MODELS    comma-separated model paths (three models)
//   DNNCOV_IMAGES / DNNCOV_LABELS  IDX files the manifests and models refer to

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <random>
#include <sstream>
#include <string>

#include "dnncov/campaign.hpp"
#include "dnncov/coverage.hpp"
#include "dnncov/engine.hpp"
#include "dnncov/error.hpp"
#include "dnncov/guided.hpp"
#include "dnncov/idx.hpp"
#include "dnncov/model_io.hpp"
#include "dnncov/parity.hpp"
#include "dnncov/report.hpp"
#include "oracles.hpp"

using namespace dnncov;
using namespace dnncov::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  enum { kPass, kFail, kSkip } status = kPass;
  std::string detail;
};

Outcome pass(std::string d) { return {Outcome::kPass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::kFail, std::move(d)}; }
Outcome skip(std::string d) { return {Outcome::kSkip, std::move(d)}; }
Outcome check(bool ok, std::string d) { return ok ? pass(std::move(d)) : fail(std::move(d)); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<std::string> split_env(const char* name) {
  std::vector<std::string> out;
  const char* v = std::getenv(name);
  if (!v) return out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

// ≤ 3 weighted layers, ≤ 32 neurons in total, hidden activations drawn from relu/tanh/sigmoid.
NetworkModel small_net(std::mt19937_64& rng, std::size_t index) {
  RandomNetOptions opts;
  opts.max_hidden_layers = 2;
  opts.max_width = 12;
  for (;;) {
    auto m = random_dense_net(rng, opts, "net" + std::to_string(index));
    std::size_t neurons = 0;
    for (std::size_t k = 0; k < m.layer_count(); ++k) neurons += element_count(m.layer_output_shape(k));
    if (neurons <= 32) return m;
  }
}

Outcome gradient_correctness() {
  constexpr double kH = 1e-3, kTol = 1e-3, kFloor = 1e-4;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0, nets = 0;
  std::set<Activation> seen;
  for (std::size_t trial = 0; trial < 200; ++trial, ++nets) {
    std::vector<NetworkModel> set = {small_net(rng, trial)};
    for (const auto& l : set[0].layers()) seen.insert(l.activation);
    auto x = random_input(rng, set[0].input_shape(), 0.05, 0.95);
    auto r = check_gradient(set, x, random_objective(rng, set), kH, kFloor);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    skipped += r.skipped;
  }
  // Sets of models with a differential term.
  for (std::size_t trial = 0; trial < 50; ++trial, ++nets) {
    std::vector<NetworkModel> set = {small_net(rng, 0)};
    while (set.size() < 3) {
      auto m = small_net(rng, set.size());
      if (m.input_shape() == set[0].input_shape() && m.class_count() == set[0].class_count()) set.push_back(m);
    }
    auto x = random_input(rng, set[0].input_shape(), 0.05, 0.95);
    auto r = check_gradient(set, x, random_objective(rng, set), kH, kFloor);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    skipped += r.skipped;
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool mixed = seen.count(Activation::kRelu) && seen.count(Activation::kTanh) && seen.count(Activation::kSigmoid);
  return check(worst < kTol && secs < 60.0 && mixed && nets >= 100,
               fmt("%zu nets, %zu elements checked, %zu at kinks skipped, max rel err %.3g (< %g), %.2fs", nets,
                   checked, skipped, worst, kTol, secs));
}

Outcome triplet_count_law() {
  std::mt19937_64 rng(1002);
  std::size_t vectors = 0;
  bool ok = TripletRegistry("x", {4, 3, 2}).total_count() == 24 && brute_force_triplets({4, 3, 2}).size() == 24;
  for (; vectors < 200; ++vectors) {
    std::vector<std::size_t> sizes(2 + rng() % 5);
    for (auto& s : sizes) s = 1 + rng() % 20;
    TripletRegistry reg("x", sizes);
    const auto brute = brute_force_triplets(sizes);
    ok &= reg.total_count() == brute.size() && TripletRegistry::closed_form_count(sizes) == brute.size();
    for (std::size_t t = 0; t < brute.size() && ok; ++t) {
      const auto [k, i, j, q] = brute[t];
      ok &= reg.triplet(t) == Triplet{k, i, j, q};
    }
  }
  return check(ok, fmt("%zu random size vectors match closed form and brute force; [4,3,2] -> 24", vectors));
}

Outcome coverage_oracle_equivalence() {
  std::mt19937_64 rng(1003);
  RandomNetOptions opts;
  opts.max_width = 10;
  opts.max_input = 10;
  std::size_t nets = 0, mismatches = 0, triplets = 0;
  for (; nets < 100; ++nets) {
    auto m = random_dense_net(rng, opts);
    if (m.coverage_layers().size() < 2) continue;
    const double theta = (nets % 3 == 0) ? 0.2 : 0.0;
    CoverageState s(TripletRegistry::for_model(m), theta);
    std::vector<std::vector<std::vector<double>>> raw;
    const std::size_t inputs = 1 + rng() % 20;
    for (std::size_t i = 0; i < inputs; ++i) {
      auto trace = forward(m, random_input(rng, m.input_shape()));
      raw.push_back(trace.values);
      s.observe(trace);
    }
    auto naive = naive_coverage(m.coverage_layer_sizes(), raw, theta);
    triplets += naive.observed.size();
    for (std::size_t t = 0; t < naive.observed.size(); ++t) mismatches += s.mask(t) != tuples_to_mask(naive.observed[t]);
    const auto st = stats(s);
    mismatches += st.triplet_coverage != naive.triplet_coverage;
    mismatches += st.pair_cell_coverage != naive.pair_cell_coverage;
    mismatches += st.full_config_coverage != naive.full_config_coverage;
  }
  return check(mismatches == 0,
               fmt("%zu nets, %zu triplets: masks and 3 metrics exact, %zu mismatches", nets, triplets, mismatches));
}

Outcome orthogonal_array() {
  auto mask_of = [](std::initializer_list<int> configs) {
    std::uint8_t m = 0;
    for (int c : configs) m |= static_cast<std::uint8_t>(1 << c);
    return m;
  };
  const std::uint8_t oa = mask_of({0b000, 0b011, 0b101, 0b110});
  auto restored = CoverageState::restore(TripletRegistry("oa", {2, 1}), 0.0, 4, {oa});
  bool ok = fully_covered(oa) && stats(restored).triplet_coverage == 1.0;
  std::size_t subsets = 0;
  for (int mask = 0; mask < 256; ++mask) {
    if (std::popcount(static_cast<unsigned>(mask)) > 3) continue;
    ++subsets;
    ObservedTuples t;
    for (int b = 0; b < 8; ++b)
      if (mask & (1 << b)) t.insert({(b & 4) != 0, (b & 2) != 0, (b & 1) != 0});
    ok &= !fully_covered(static_cast<std::uint8_t>(mask)) && naive_pair_cells(t) < 12;
  }
  return check(ok, fmt("{000,011,101,110} fully covers; none of %zu subsets of size <= 3 does", subsets));
}

Outcome performance_anchor() {
  const std::vector<std::size_t> sizes = {6, 16, 120, 84, 10};
  CoverageState s(TripletRegistry("perf", sizes));
  std::mt19937_64 rng(1005);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  bool every_triplet_written = true;
  for (int input = 0; input < 5; ++input) {
    std::vector<std::vector<double>> v;
    for (auto n : sizes) {
      std::vector<double> layer(n);
      for (double& x : layer) x = nd(rng);
      v.push_back(layer);
    }
    const auto t0 = Clock::now();
    s.observe(v);
    worst = std::max(worst, std::chrono::duration<double>(Clock::now() - t0).count());
    if (input == 0)
      for (auto m : s.masks()) every_triplet_written &= std::popcount(static_cast<unsigned>(m)) == 1;
  }
  const std::size_t total = s.registry().total_count();
  return check(total >= 600000 && worst <= 3.0 && every_triplet_written,
               fmt("%zu triplets, slowest observe %.4fs of 5 (limit 3s)", total, worst));
}

Outcome monotonicity_and_determinism() {
  std::mt19937_64 rng(1006);
  bool monotone = true;
  for (int seq = 0; seq < 20; ++seq) {
    std::vector<std::size_t> sizes(2 + rng() % 3);
    for (auto& n : sizes) n = 2 + rng() % 10;
    CoverageState s(TripletRegistry("mono", sizes), (seq % 2) ? 0.3 : 0.0);
    CoverageStats prev = stats(s);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 40; ++i) {
      std::vector<std::vector<double>> v;
      for (auto n : sizes) {
        std::vector<double> layer(n);
        for (double& x : layer) x = u(rng);
        v.push_back(layer);
      }
      s.observe(v);
      const auto now = stats(s);
      monotone &= now.triplet_coverage >= prev.triplet_coverage && now.pair_cell_coverage >= prev.pair_cell_coverage &&
                  now.full_config_coverage >= prev.full_config_coverage;
      prev = now;
    }
  }

  const auto dir = temp_dir("acceptance");
  std::vector<Tensor> images;
  for (int i = 0; i < 60; ++i) images.push_back(random_input(rng, {6, 6}));
  write_idx_images(dir / "images.idx", images);
  CampaignConfig cfg;
  for (int m = 0; m < 3; ++m) {
    const auto p = dir / ("m" + std::to_string(m) + ".json");
    save_model(small_classifier(500 + m, "m" + std::to_string(m)), p);
    cfg.model_paths.push_back(p.string());
  }
  cfg.images_path = (dir / "images.idx").string();
  cfg.seed_count = 20;
  cfg.rng_seed = 77;
  cfg.gen.max_iterations = 100;
  bool reproducible = true;
  std::size_t campaigns = 0;
  for (auto mode : {CampaignMode::kRandomEval, CampaignMode::kGuidedGenerate, CampaignMode::kNeuronCoverageBaseline}) {
    cfg.mode = mode;
    std::string bytes[2];
    for (int run = 0; run < 2; ++run) {
      auto r = run_campaign(cfg);
      r.timings = Timings{};
      const auto path = dir / ("r" + std::to_string(run) + ".json");
      write_report(r, path);
      std::ifstream in(path, std::ios::binary);
      bytes[run].assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    reproducible &= !bytes[0].empty() && bytes[0] == bytes[1];
    ++campaigns;
  }
  std::filesystem::remove_all(dir);
  return check(monotone && reproducible,
               fmt("20 observation sequences monotone: %s; %zu campaign modes byte-identical across runs: %s",
                   monotone ? "yes" : "no", campaigns, reproducible ? "yes" : "no"));
}

Outcome brightness_constraint() {
  std::mt19937_64 rng(1007);
  double worst = 0.0;
  std::size_t candidates = 0, moved = 0;
  auto run = [&](const std::vector<NetworkModel>& set, GenParams params, std::size_t n) {
    std::vector<CoverageState> states;
    for (const auto& m : set) states.emplace_back(TripletRegistry::for_model(m));
    std::vector<Tensor> seeds;
    for (std::size_t i = 0; i < n; ++i) seeds.push_back(random_input(rng, set[0].input_shape()));
    std::vector<std::size_t> idx(n, 0);
    auto oracle = make_oracle("differential");
    generate(seeds, idx, {}, set, states, *oracle, params, [&](const GenerationRecord& r, auto) {
      const Tensor& seed = seeds[candidates % n];
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t i = 0; i < seed.size(); ++i) {
        const double c = r.candidate.input[i];
        if (c <= 0.0 || c >= 1.0) continue;
        lo = std::min(lo, c - seed[i]);
        hi = std::max(hi, c - seed[i]);
      }
      if (hi >= lo) worst = std::max(worst, hi - lo);
      moved += r.candidate.manipulation != 0.0;
      ++candidates;
    });
    candidates = 0;
  };
  std::size_t total = 0;
  for (int k = 0; k < 4; ++k) {
    std::vector<NetworkModel> dense;
    for (int m = 0; m < 3; ++m) dense.push_back(small_classifier(600 + 3 * k + m, "d" + std::to_string(m)));
    GenParams p;
    p.rng_seed = k;
    p.step_rule = k % 2 ? StepRule::kScaled : StepRule::kSign;
    p.step_size = k % 2 ? 5.0 : 0.1;
    p.max_iterations = 200;
    run(dense, p, 25);
    total += 25;
  }
  for (int k = 0; k < 2; ++k) {
    std::vector<NetworkModel> conv;
    while (conv.size() < 2) {
      auto m = random_conv_net(rng, "c" + std::to_string(conv.size()));
      if (conv.empty() || m.class_count() == conv[0].class_count()) conv.push_back(m);
    }
    GenParams p;
    p.max_iterations = 200;
    p.retarget = k ? Retarget::kPerIteration : Retarget::kPerSeed;
    run(conv, p, 20);
    total += 20;
  }
  return check(worst <= 1e-6 && moved > 0,
               fmt("%zu candidates (%zu moved), max spread of unclipped offset %.3g (<= 1e-6)", total, moved, worst));
}

Outcome parity_with_exporter() {
  const auto manifests = split_env("DNNCOV_PARITY_MANIFESTS");
  const char* images = std::getenv("DNNCOV_IMAGES");
  if (manifests.empty() || !images) return skip("set DNNCOV_PARITY_MANIFESTS and DNNCOV_IMAGES");
  const auto dataset = read_idx_images(images);
  bool ok = true;
  std::string detail;
  for (const auto& path : manifests) {
    const auto manifest = load_parity_manifest(path);
    const auto r = check_parity(load_model(manifest.model_file), dataset, manifest);
    ok &= r.passed() && r.samples_checked >= 100 && r.tolerance <= 1e-3;
    detail += fmt("%s: %zu samples, %zu label mismatches, max err %.3g; ", manifest.model_file.filename().c_str(),
                  r.samples_checked, r.label_mismatches, r.max_abs_error);
  }
  return check(ok, detail);
}

CampaignConfig trained_config(CampaignMode mode, std::size_t seeds) {
  CampaignConfig c;
  c.model_paths = split_env("DNNCOV_TRAINED_MODELS");
  c.images_path = std::getenv("DNNCOV_IMAGES");
  c.mode = mode;
  c.seed_count = seeds;
  c.rng_seed = 2024;
  return c;
}

bool have_trained() { return split_env("DNNCOV_TRAINED_MODELS").size() >= 3 && std::getenv("DNNCOV_IMAGES"); }

Outcome neuron_vs_triplet_direction() {
  if (!have_trained()) return skip("set DNNCOV_TRAINED_MODELS (3 models) and DNNCOV_IMAGES");
  auto r = run_campaign(trained_config(CampaignMode::kNeuronCoverageBaseline, 10));
  bool ok = true;
  std::string detail;
  for (const auto& m : r.models) {
    const double nc = m.neuron_coverage, tc = m.final_stats.triplet_coverage;
    std::size_t nc_sat = 0, tc_sat = 0;
    while (nc_sat < m.neuron_coverage_curve.size() && m.neuron_coverage_curve[nc_sat] <= 0.9) ++nc_sat;
    while (tc_sat < m.triplet_coverage_curve.size() && m.triplet_coverage_curve[tc_sat] <= 0.9) ++tc_sat;
    ok &= nc >= 2.0 * tc && nc > 0.9 && nc_sat < tc_sat;
    detail += fmt("%s: neuron %.3f vs triplet %.3f; ", m.name.c_str(), nc, tc);
  }
  return check(ok, detail);
}

Outcome guided_vs_random() {
  if (!have_trained()) return skip("set DNNCOV_TRAINED_MODELS (3 models) and DNNCOV_IMAGES");
  const auto t0 = Clock::now();
  auto guided = run_campaign(trained_config(CampaignMode::kGuidedGenerate, 50));
  auto random = run_campaign(trained_config(CampaignMode::kRandomEval, 50));
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  bool ok = guided.adversarial_ratio.value_or(0.0) > 0.0 && secs <= 900.0;
  std::string detail;
  for (std::size_t m = 0; m < guided.models.size(); ++m) {
    ok &= guided.models[m].final_stats.triplet_coverage > random.models[m].final_stats.triplet_coverage;
    detail += fmt("%s: guided %.3f vs random %.3f; ", guided.models[m].name.c_str(),
                  guided.models[m].final_stats.triplet_coverage, random.models[m].final_stats.triplet_coverage);
  }
  return check(ok, detail + fmt("ratio %.3f, %.1fs", guided.adversarial_ratio.value_or(0.0), secs));
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    bool primary;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, true, "gradient correctness", gradient_correctness},
      {2, true, "triplet count law", triplet_count_law},
      {3, true, "coverage oracle equivalence", coverage_oracle_equivalence},
      {4, true, "orthogonal-array property", orthogonal_array},
      {5, true, "observe performance", performance_anchor},
      {6, true, "monotonicity and determinism", monotonicity_and_determinism},
      {7, true, "brightness constraint", brightness_constraint},
      {8, false, "cross-engine parity", parity_with_exporter},
      {9, false, "neuron vs triplet coverage direction", neuron_vs_triplet_direction},
      {10, false, "guided vs random", guided_vs_random},
  };
  int primary_failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Outcome::kPass ? "PASS" : (o.status == Outcome::kFail ? "FAIL" : "SKIP");
    std::printf("[%s] %2d %-9s %s: %s\n", tag, c.id, c.primary ? "primary" : "secondary", c.name, o.detail.c_str());
    std::fflush(stdout);
    if (c.primary && o.status != Outcome::kPass) ++primary_failures;
  }
  return primary_failures == 0 ? 0 : 1;
}
