#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedscore/core.hpp"

namespace fedscore {

enum class Activation { Relu, Sigmoid, Softmax };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct LayerSpec {
  std::size_t units = 0;
  Activation activation = Activation::Relu;

  bool operator==(const LayerSpec&) const = default;
};

/// Hidden layers of a fully connected network. The output layer is implicit:
/// a softmax over the client's label subset.
struct ArchSpec {
  std::vector<LayerSpec> hidden;

  void validate() const;  // InvalidArch
  /// e.g. "mlp(16:softmax,32:softmax)->softmax"
  std::string describe() const;

  bool operator==(const ArchSpec&) const = default;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct EarlyStop {
  int patience = 1;
  double min_delta = 1e-4;
};

struct TrainConfig {
  double learning_rate = 0.001;
  int max_epochs = 5;
  std::size_t batch_size = 32;
  EarlyStop early_stop;
  AdamHyper adam;

  void validate() const;  // InvalidArgument
};

struct LayerLayout {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::Relu;
  std::size_t weight_offset = 0;  // out x in, row-major
  std::size_t bias_offset = 0;    // out
};

/// A trained or freshly initialized network. Parameters live in one flat
/// vector; `layers` maps each layer onto it.
struct Model {
  ArchSpec arch;
  std::size_t n_features = 0;
  LabelSet label_cols;
  std::vector<LayerLayout> layers;
  std::vector<double> params;

  std::size_t parameter_count() const noexcept { return params.size(); }
  std::size_t output_position(LabelId label) const;  // LabelOutsideCols
};

/// Glorot-uniform weights, zero biases; deterministic in `seed`.
Model init_model(const ArchSpec& arch, std::size_t n_features, LabelSet label_cols, std::uint64_t seed);

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean of -log(max(p_true, floor)) over the rows.
double cross_entropy(const ScoreMatrix& scores, std::span<const LabelId> labels);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

/// One bias-corrected Adam step in place; increments state.t. Throws ShapeMismatch.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate, const AdamHyper& hyper);

/// Mean cross-entropy over `rows` of `data` and, when `grad` is non-empty,
/// its gradient with respect to model.params (overwritten).
double loss_and_gradient(const Model& model, const Dataset& data, std::span<const std::size_t> rows,
                         std::span<double> grad);

struct TrainResult {
  Model model;
  int epochs_run = 0;
  std::vector<double> epoch_losses;
};

/// Mini-batch Adam on the shard with early stopping on the epoch-mean
/// training loss. Batch order is deterministic in `seed`.
TrainResult train(Model model, const Dataset& shard, const TrainConfig& cfg, std::uint64_t seed);

/// Row-stochastic scores over model.label_cols for every row of `data`.
ScoreMatrix predict_scores(const Model& model, const Dataset& data);

}  // namespace fedscore
