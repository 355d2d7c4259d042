#include "dnncov/guided.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "dnncov/error.hpp"

namespace dnncov {

namespace {

using ObjectiveProvider = std::function<const ObjectiveSpec&(std::size_t iteration)>;

struct Evaluation {
  bool target_reached = false;
  bool disagreement = false;
};

Evaluation evaluate(std::span<const NetworkModel> models, const Tensor& x, const ObjectiveSpec& spec,
                    double threshold) {
  std::vector<std::optional<ActivationTrace>> traces(models.size());
  auto trace = [&](std::size_t m) -> const ActivationTrace& {
    if (!traces[m]) traces[m] = forward(models[m], x);
    return *traces[m];
  };
  Evaluation e;
  e.target_reached = !spec.terms.empty() && std::all_of(spec.terms.begin(), spec.terms.end(), [&](const auto& t) {
    const bool fired = trace(t.model).at(t.neuron) > threshold;
    return t.sign > 0 ? fired : !fired;
  });
  if (models.size() >= 2) {
    const std::size_t first = trace(0).predicted_label;
    for (std::size_t m = 1; m < models.size(); ++m) {
      if (trace(m).predicted_label != first) {
        e.disagreement = true;
        break;
      }
    }
  }
  return e;
}

Tensor brighten(const Tensor& seed, double offset) {
  std::vector<double> px(seed.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = std::clamp(seed[i] + offset, 0.0, 1.0);
  return Tensor(seed.shape(), std::move(px));
}

Candidate ascend_with(const Tensor& seed, const ObjectiveProvider& objective_at, const GenParams& params,
                      std::span<const NetworkModel> models) {
  params.validate();
  for (double v : seed.data()) {
    if (v < 0.0 || v > 1.0) throw Error(ErrorCode::kInput, "seed values must lie in [0, 1]");
  }

  Candidate c;
  c.input = seed;
  const bool seed_disagrees = evaluate(models, seed, objective_at(0), params.threshold).disagreement;

  for (std::size_t it = 0;; ++it) {
    const ObjectiveSpec& spec = objective_at(it);
    const Evaluation e = evaluate(models, c.input, spec, params.threshold);
    c.target_reached = e.target_reached;
    c.differential_found = e.disagreement && !seed_disagrees;
    if (spec.terms.empty() || c.target_reached || c.differential_found || it >= params.max_iterations) {
      c.objective = objective_value(models, c.input, spec);
      break;
    }

    const Tensor grad = input_gradient(models, c.input, spec);
    const double mean = std::accumulate(grad.data().begin(), grad.data().end(), 0.0) / static_cast<double>(grad.size());
    double delta = 0.0;
    if (params.step_rule == StepRule::kSign) {
      delta = mean > 0.0 ? params.step_size : (mean < 0.0 ? -params.step_size : 0.0);
    } else {
      delta = params.step_size * mean;
    }
    const double offset = std::clamp(c.manipulation + delta, -1.0, 1.0);
    Tensor next = brighten(seed, offset);
    if (delta == 0.0 || next == c.input) {  // fixed point: the same input would yield the same step
      c.objective = objective_value(models, c.input, spec);
      break;
    }
    c.manipulation = offset;
    c.input = std::move(next);
    c.iterations_used = it + 1;
  }
  return c;
}

}  // namespace

void GenParams::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw Error(ErrorCode::kInput, "step_size must be > 0");
  if (max_iterations < 1) throw Error(ErrorCode::kInput, "max_iterations must be >= 1");
  if (!std::isfinite(lambda1) || !std::isfinite(lambda2)) throw Error(ErrorCode::kNumeric, "lambdas must be finite");
  if (std::isnan(threshold)) throw Error(ErrorCode::kNumeric, "threshold is NaN");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ObjectiveSpec differential_only_objective(std::size_t target_model, std::span<const NetworkModel> models,
                                          std::size_t seed_label, const GenParams& params) {
  if (target_model >= models.size()) throw Error(ErrorCode::kInput, "target model index out of range");
  ObjectiveSpec spec;
  spec.coverage_weight = params.lambda2;
  if (models.size() >= 2) {
    DifferentialTerm d;
    d.label = seed_label;
    d.coefficients.assign(models.size(), 1.0);
    d.coefficients[target_model] = -params.lambda1;
    spec.differential = std::move(d);
  }
  return spec;
}

ObjectiveSpec build_objective(const Triplet& triplet, Config config, std::size_t target_model,
                              std::span<const NetworkModel> models, std::size_t seed_label, const GenParams& params) {
  if (config > 7) throw Error(ErrorCode::kInput, "activation configuration must be in 0..7");
  ObjectiveSpec spec = differential_only_objective(target_model, models, seed_label, params);
  const NetworkModel& model = models[target_model];
  const NeuronId ni{triplet.layer_pair, triplet.i};
  const NeuronId nj{triplet.layer_pair, triplet.j};
  const NeuronId nq{triplet.layer_pair + 1, triplet.q};
  if (!(triplet.i < triplet.j)) throw Error(ErrorCode::kInvalidNeuron, "triplet requires i < j");
  model.check(ni);
  model.check(nj);
  model.check(nq);
  auto sign = [config](int bit) { return (config >> bit) & 1 ? +1 : -1; };
  spec.terms = {
      {target_model, ni, sign(2), 1.0},
      {target_model, nj, sign(1), 1.0},
      {target_model, nq, sign(0), 1.0},
  };
  validate(models, spec);
  return spec;
}

Candidate ascend(const Tensor& seed, const ObjectiveSpec& spec, const GenParams& params,
                 std::span<const NetworkModel> models, std::size_t target_model) {
  if (target_model >= models.size()) throw Error(ErrorCode::kInput, "target model index out of range");
  validate(models, spec);
  return ascend_with(seed, [&spec](std::size_t) -> const ObjectiveSpec& { return spec; }, params, models);
}

GuidedGenerator::GuidedGenerator(std::span<const NetworkModel> models, std::span<CoverageState> states,
                                 const Oracle& oracle, GenParams params)
    : models_(models), states_(states), oracle_(oracle), params_(params) {
  params_.validate();
  if (models_.empty()) throw Error(ErrorCode::kInput, "guided generation needs at least one model");
  if (states_.size() != models_.size()) throw Error(ErrorCode::kInput, "need one coverage state per model");
  if (models_.size() < oracle_.min_models()) {
    throw Error(ErrorCode::kInput, std::string(oracle_.name()) + " oracle needs at least " +
                                       std::to_string(oracle_.min_models()) + " models");
  }
  for (std::size_t m = 0; m < models_.size(); ++m) {
    if (states_[m].registry().fingerprint() != TripletRegistry::for_model(models_[m]).fingerprint()) {
      throw Error(ErrorCode::kInput, "coverage state " + std::to_string(m) + " was not built for model '" +
                                         models_[m].name() + "'");
    }
  }
}

GenerationRecord GuidedGenerator::step(const Tensor& seed, std::size_t seed_index,
                                       std::optional<std::size_t> ground_truth) {
  GenerationRecord rec;
  const std::size_t target_model = steps_ % models_.size();
  const std::uint64_t step_seed = mix_seed(params_.rng_seed, steps_);
  ++steps_;
  rec.target_model = target_model;
  const std::size_t seed_label = forward(models_[target_model], seed).predicted_label;
  const CoverageState& state = states_[target_model];

  auto objective_for = [&](std::uint64_t rng) {
    const auto targets = uncovered_targets(state, rng, 1);
    if (targets.empty()) {
      return std::pair{differential_only_objective(target_model, models_, seed_label, params_),
                       std::optional<CoverageTarget>{}};
    }
    const CoverageTarget& t = targets.front();
    return std::pair{build_objective(t.triplet, t.config, target_model, models_, seed_label, params_),
                     std::optional<CoverageTarget>{t}};
  };

  if (params_.retarget == Retarget::kPerSeed) {
    auto [spec, target] = objective_for(step_seed);
    rec.target = target;
    rec.candidate = ascend_with(seed, [&spec](std::size_t) -> const ObjectiveSpec& { return spec; }, params_, models_);
  } else {
    ObjectiveSpec current;
    std::size_t current_iteration = static_cast<std::size_t>(-1);
    rec.candidate = ascend_with(
        seed,
        [&](std::size_t it) -> const ObjectiveSpec& {
          if (it != current_iteration) {
            auto [spec, target] = objective_for(mix_seed(step_seed, it));
            current = std::move(spec);
            rec.target = target;
            current_iteration = it;
          }
          return current;
        },
        params_, models_);
  }
  rec.candidate.seed_index = seed_index;

  rec.traces.reserve(models_.size());
  for (const auto& m : models_) rec.traces.push_back(forward(m, rec.candidate.input));
  rec.verdict = oracle_.judge(rec.traces, ground_truth);

  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t m = 0; m < models_.size(); ++m) states_[m].observe(rec.traces[m]);
  rec.coverage_update_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

void generate(std::span<const Tensor> seeds, std::span<const std::size_t> seed_indices,
              std::span<const std::optional<std::size_t>> ground_truth, std::span<const NetworkModel> models,
              std::span<CoverageState> states, const Oracle& oracle, const GenParams& params,
              const GenerationSink& sink) {
  if (seed_indices.size() != seeds.size()) throw Error(ErrorCode::kInput, "one seed index per seed required");
  if (!ground_truth.empty() && ground_truth.size() != seeds.size()) {
    throw Error(ErrorCode::kInput, "ground truth must be empty or one label per seed");
  }
  GuidedGenerator gen(models, states, oracle, params);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const auto truth = ground_truth.empty() ? std::nullopt : ground_truth[s];
    const GenerationRecord rec = gen.step(seeds[s], seed_indices[s], truth);
    if (sink) sink(rec, states);
  }
}

}  // namespace dnncov
