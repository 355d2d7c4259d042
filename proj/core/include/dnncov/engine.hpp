#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnncov/model.hpp"
#include "dnncov/tensor.hpp"

namespace dnncov {

/// Scalar neuron activations of one forward pass, one vector per coverage
/// layer. Dense neurons report their post-activation value; conv neurons
/// report the spatial mean of one output channel after activation.
struct ActivationTrace {
  std::string model_name;
  std::vector<std::vector<double>> values;
  std::vector<double> logits;  // final layer output
  std::size_t predicted_label = 0;

  double at(const NeuronId& id) const { return values.at(id.coverage_layer).at(id.neuron); }
};

/// argmax with ties resolved toward the lowest index.
std::size_t argmax(std::span<const double> values);

/// Runs the network on `input` (shape == model.input_shape(), values in
/// [0, 1]). Throws kShapeMismatch/kInput for bad inputs and kNumeric naming
/// the layer if an intermediate value is not finite.
ActivationTrace forward(const NetworkModel& model, const Tensor& input);

/// Every layer's post-activation output, in layer order.
std::vector<Tensor> layer_outputs(const NetworkModel& model, const Tensor& input);

/// Class probabilities of a trace: the logits themselves when the network
/// ends in softmax, softmax(logits) otherwise.
std::vector<double> class_probabilities(const NetworkModel& model, const ActivationTrace& trace);

/// One signed, weighted neuron activation inside an objective.
struct ObjectiveTerm {
  std::size_t model = 0;  // index into the model set
  NeuronId neuron;
  int sign = +1;  // +1 or -1
  double weight = 1.0;
};

/// Σ_m coefficients[m] · P_m(label), where P_m is model m's class probability.
struct DifferentialTerm {
  std::size_t label = 0;
  std::vector<double> coefficients;  // one per model in the set
};

/// objective(t) = coverage_weight · Σ sign·weight·φ(t, neuron) + differential(t)
struct ObjectiveSpec {
  std::vector<ObjectiveTerm> terms;
  std::optional<DifferentialTerm> differential;
  double coverage_weight = 1.0;
};

/// Throws kInvalidNeuron / kInput when `spec` does not fit the model set.
void validate(std::span<const NetworkModel> models, const ObjectiveSpec& spec);

double objective_value(std::span<const NetworkModel> models, const Tensor& input, const ObjectiveSpec& spec);

/// ∂objective/∂input by reverse-mode accumulation. relu'(0) = 0; max-pool
/// ties route the gradient to the lowest flat index.
Tensor input_gradient(std::span<const NetworkModel> models, const Tensor& input, const ObjectiveSpec& spec);

}  // namespace dnncov
