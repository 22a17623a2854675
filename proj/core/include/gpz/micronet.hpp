#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpz/activations.hpp"
#include "gpz/dataset.hpp"
#include "gpz/matrix.hpp"

namespace gpz {

enum class Activation : std::uint8_t { relu = 0, identity = 1 };

/// y = act(W x + b), W stored out x in row-major.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::relu;
  std::vector<float> weights;
  std::vector<float> bias;

  float weight(std::size_t r, std::size_t c) const { return weights[r * in + c]; }

  bool operator==(const DenseLayer&) const = default;
};

/// Sequential classifier. Layers [0, split_index) form the edge part, the
/// rest the cloud part. The last layer emits logits (identity activation).
struct MlpModel {
  std::vector<DenseLayer> layers;
  std::size_t split_index = 0;

  std::size_t num_layers() const noexcept { return layers.size(); }
  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }

  /// Throws InvalidArgument on broken chaining, bad split, non-finite weights.
  void validate() const;

  bool operator==(const MlpModel&) const = default;
};

/// Training target family. Negative alpha is allowed.
struct TargetScheme {
  enum class Kind { onehot, label_smoothing, prior_smoothing };

  Kind kind = Kind::onehot;
  double alpha = 0.0;
  std::vector<double> prior;

  static TargetScheme onehot() { return {}; }
  static TargetScheme label_smoothing(double alpha) {
    return {Kind::label_smoothing, alpha, {}};
  }
  static TargetScheme prior_smoothing(double alpha, std::vector<double> prior) {
    return {Kind::prior_smoothing, alpha, std::move(prior)};
  }

  /// "onehot", "ls:0.3", "ls:-0.05", "prior:0.3". A prior scheme parsed from
  /// text gets its prior filled in later from the label frequencies.
  static TargetScheme parse(std::string_view text);
  std::string to_string() const;

  /// Off-class weights r^(c): zero at c, summing to one elsewhere.
  std::vector<double> off_class_weights(std::size_t label, std::size_t num_classes) const;
};

/// Post-activation vectors of every layer; logits are the last entry.
struct ForwardTrace {
  std::vector<std::vector<double>> activations;
  std::vector<double> probs;

  const std::vector<double>& logits() const { return activations.back(); }
};

enum class LossKind { cross_entropy, squared_error };

struct LossResidual {
  double loss = 0.0;
  std::vector<double> residual;
};

struct TrainConfig {
  std::size_t epochs = 50;
  double lr = 0.1;
  std::size_t batch = 16;
  std::uint64_t seed = 0;
  TargetScheme scheme;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_curve;
  double train_accuracy = 0.0;
};

struct ParamCount {
  std::size_t edge = 0;
  std::size_t total = 0;
  double edge_share = 0.0;
};

/// Per-layer parameter gradients (double precision) for one sample or a batch.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
};

/// `widths[0]` is the input dimension; the remaining entries are hidden
/// widths. A final num_classes-wide identity layer is appended.
MlpModel init_model(std::span<const std::size_t> widths, std::size_t num_classes,
                    std::uint64_t seed);

/// Target row for one label.
std::vector<double> target_row(std::uint32_t label, const TargetScheme& scheme,
                               std::size_t num_classes);

/// B x K targets.
Matrix make_targets(std::span<const std::uint32_t> labels, const TargetScheme& scheme,
                    std::size_t num_classes);

ForwardTrace forward(const MlpModel& model, std::span<const float> x);
ForwardTrace forward(const MlpModel& model, std::span<const double> x);

/// Logits obtained by feeding `z` as the output of layer `layer`.
std::vector<double> forward_from(const MlpModel& model, std::size_t layer,
                                 std::span<const double> z);

std::vector<double> softmax(std::span<const double> logits);

/// Cross-entropy loss -sum q log p and logit residual p - q.
LossResidual loss_and_residual(const ForwardTrace& trace, std::span<const double> target);

/// Gradient of the per-sample loss w.r.t. every parameter.
Gradients parameter_gradients(const MlpModel& model, std::span<const double> x,
                              std::span<const double> target, LossKind loss);

/// Gradient of the per-sample loss w.r.t. the output of `layer`.
std::vector<double> activation_gradient(const MlpModel& model, std::span<const double> x,
                                        std::span<const double> target, std::size_t layer,
                                        LossKind loss = LossKind::cross_entropy);

/// Mean loss of the model over `inputs` (B x d_in row-major) against
/// `targets` (B x d_out).
double mean_loss(const MlpModel& model, std::span<const float> inputs,
                 const Matrix& targets, LossKind loss);

/// Plain minibatch SGD on arbitrary (input, target) pairs. Returns the mean
/// training loss after every epoch.
std::vector<double> fit(MlpModel& model, std::span<const float> inputs,
                        const Matrix& targets, LossKind loss, std::size_t epochs,
                        double lr, std::size_t batch, std::uint64_t seed);

/// Cross-entropy classifier training under `config.scheme`.
TrainResult train(MlpModel model, const Dataset& data, const TrainConfig& config);

double accuracy(const MlpModel& model, const Dataset& data);

/// d o / d z_layer, K x d_layer. ReLU derivative is 0 at exactly 0.
Matrix jacobian(const MlpModel& model, std::span<const double> x, std::size_t layer);

std::string layer_name(std::size_t layer);

/// Representations at `layers` for every sample of `data`, in dataset order.
ActivationSet extract(const MlpModel& model, const Dataset& data,
                      std::span<const std::size_t> layers);

/// Every layer index of the model.
std::vector<std::size_t> all_layers(const MlpModel& model);

ParamCount count_params(const MlpModel& model, std::size_t split_index);

}  // namespace gpz
