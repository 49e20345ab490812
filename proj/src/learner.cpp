#include "fedscore/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedscore/kernels.hpp"
#include "fedscore/rng.hpp"

namespace fedscore {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "softmax") return Activation::Softmax;
  throw Error(ErrorKind::InvalidArch, "unknown activation '" + std::string(name) + "'");
}

void ArchSpec::validate() const {
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    if (hidden[l].units < 1) {
      throw Error(ErrorKind::InvalidArch, "hidden layer " + std::to_string(l) + " has zero units");
    }
  }
}

std::string ArchSpec::describe() const {
  std::string out = "mlp(";
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    if (l) out += ',';
    out += std::to_string(hidden[l].units) + ':' + std::string(to_string(hidden[l].activation));
  }
  return out + ")->softmax";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "learning_rate must be > 0");
  if (max_epochs < 1) throw Error(ErrorKind::InvalidArgument, "max_epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  if (early_stop.patience < 1) throw Error(ErrorKind::InvalidArgument, "patience must be >= 1");
  if (!(early_stop.min_delta >= 0.0)) throw Error(ErrorKind::InvalidArgument, "min_delta must be >= 0");
  if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0) || !(adam.beta2 > 0.0 && adam.beta2 < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "adam betas must lie in (0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "adam epsilon must be > 0");
}

std::size_t Model::output_position(LabelId label) const {
  auto it = std::lower_bound(label_cols.begin(), label_cols.end(), label);
  if (it == label_cols.end() || *it != label) {
    throw Error(ErrorKind::LabelOutsideCols, "label index " + std::to_string(label.value) +
                                                 " is not an output of this model");
  }
  return static_cast<std::size_t>(it - label_cols.begin());
}

Model init_model(const ArchSpec& arch, std::size_t n_features, LabelSet label_cols, std::uint64_t seed) {
  arch.validate();
  if (n_features < 1) throw Error(ErrorKind::InvalidArch, "model needs at least one input feature");
  if (label_cols.empty()) throw Error(ErrorKind::InvalidArch, "model needs at least one output label");
  std::sort(label_cols.begin(), label_cols.end());

  Model model{arch, n_features, std::move(label_cols), {}, {}};
  std::size_t in = n_features;
  std::size_t offset = 0;
  auto add_layer = [&](std::size_t out, Activation act) {
    model.layers.push_back(LayerLayout{in, out, act, offset, offset + out * in});
    offset += out * in + out;
    in = out;
  };
  for (const auto& h : arch.hidden) add_layer(h.units, h.activation);
  add_layer(model.label_cols.size(), Activation::Softmax);

  model.params.assign(offset, 0.0);
  Xoshiro256 rng(seed);
  for (const auto& layer : model.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (std::size_t k = 0; k < layer.out * layer.in; ++k) {
      model.params[layer.weight_offset + k] = rng.uniform(-limit, limit);
    }
  }
  return model;
}

double cross_entropy(const ScoreMatrix& scores, std::span<const LabelId> labels) {
  if (labels.size() != scores.rows()) throw Error(ErrorKind::ShapeMismatch, "one label per row required");
  if (labels.empty()) throw Error(ErrorKind::ShapeMismatch, "cross-entropy of zero rows");
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const std::size_t c = scores.column_of(labels[r]);
    if (c == ScoreMatrix::npos) {
      throw Error(ErrorKind::LabelOutsideCols, "label index " + std::to_string(labels[r].value));
    }
    total -= std::log(std::max(scores.at(r, c), kProbabilityFloor));
  }
  return total / static_cast<double>(labels.size());
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate, const AdamHyper& hyper) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "adam: params, grads and moments differ in length");
  }
  if (state.t < 0) throw Error(ErrorKind::InvalidArgument, "adam: negative step counter");
  ++state.t;
  const double t = static_cast<double>(state.t);
  const kernels::AdamCoefficients coeff{learning_rate,
                                        hyper.beta1,
                                        hyper.beta2,
                                        hyper.epsilon,
                                        1.0 / (1.0 - std::pow(hyper.beta1, t)),
                                        1.0 / (1.0 - std::pow(hyper.beta2, t))};
  kernels::adam_update(coeff, grads, params, state.m, state.v);
}

namespace {

void activate(Activation act, std::span<double> z) {
  switch (act) {
    case Activation::Relu:
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::Sigmoid:
      for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
      break;
    case Activation::Softmax: {
      const double top = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (auto& v : z) {
        v = std::exp(v - top);
        sum += v;
      }
      for (auto& v : z) v /= sum;
      break;
    }
  }
}

// Turns dL/da into dL/dz in place, given the activation output a.
void backprop_activation(Activation act, std::span<const double> a, std::span<double> delta) {
  switch (act) {
    case Activation::Relu:
      for (std::size_t j = 0; j < a.size(); ++j) {
        if (a[j] <= 0.0) delta[j] = 0.0;
      }
      break;
    case Activation::Sigmoid:
      for (std::size_t j = 0; j < a.size(); ++j) delta[j] *= a[j] * (1.0 - a[j]);
      break;
    case Activation::Softmax: {
      const double inner = kernels::dot(a, delta);
      for (std::size_t j = 0; j < a.size(); ++j) delta[j] = a[j] * (delta[j] - inner);
      break;
    }
  }
}

/// Per-example forward/backward buffers, reused across rows.
class Network {
 public:
  explicit Network(const Model& model) : model_(model) {
    acts_.resize(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) acts_[l].resize(model.layers[l].out);
    std::size_t widest = model.n_features;
    for (const auto& layer : model.layers) widest = std::max(widest, layer.out);
    delta_.resize(widest);
    prev_delta_.resize(widest);
  }

  std::span<const double> forward(std::span<const double> x) {
    input_ = x;
    std::span<const double> in = x;
    const auto& p = model_.params;
    for (std::size_t l = 0; l < model_.layers.size(); ++l) {
      const auto& layer = model_.layers[l];
      auto& out = acts_[l];
      for (std::size_t j = 0; j < layer.out; ++j) {
        const std::span<const double> w(p.data() + layer.weight_offset + j * layer.in, layer.in);
        out[j] = kernels::dot(w, in) + p[layer.bias_offset + j];
      }
      activate(layer.activation, out);
      in = out;
    }
    return acts_.back();
  }

  /// Accumulates the gradient of -log p[target] for the last forward() call.
  void backward(std::size_t target, std::span<double> grad) {
    const auto& p = model_.params;
    const auto& probs = acts_.back();
    std::span<double> delta(delta_.data(), probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j) delta[j] = probs[j];
    delta[target] -= 1.0;

    for (std::size_t l = model_.layers.size(); l-- > 0;) {
      const auto& layer = model_.layers[l];
      const std::span<const double> in = l == 0 ? input_ : std::span<const double>(acts_[l - 1]);
      for (std::size_t j = 0; j < layer.out; ++j) {
        if (delta[j] == 0.0) continue;
        kernels::axpy(delta[j], in, grad.subspan(layer.weight_offset + j * layer.in, layer.in));
        grad[layer.bias_offset + j] += delta[j];
      }
      if (l == 0) break;
      std::span<double> back(prev_delta_.data(), layer.in);
      std::fill(back.begin(), back.end(), 0.0);
      for (std::size_t j = 0; j < layer.out; ++j) {
        if (delta[j] == 0.0) continue;
        kernels::axpy(delta[j], std::span<const double>(p.data() + layer.weight_offset + j * layer.in, layer.in),
                      back);
      }
      backprop_activation(model_.layers[l - 1].activation, acts_[l - 1], back);
      std::copy(back.begin(), back.end(), delta_.begin());
      delta = std::span<double>(delta_.data(), layer.in);
    }
  }

 private:
  const Model& model_;
  std::span<const double> input_;
  std::vector<std::vector<double>> acts_;
  std::vector<double> delta_;
  std::vector<double> prev_delta_;
};

std::vector<std::size_t> target_positions(const Model& model, const Dataset& data) {
  std::vector<std::size_t> out(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) out[r] = model.output_position(data.labels[r]);
  return out;
}

void check_width(const Model& model, const Dataset& data) {
  if (data.n_features != model.n_features) {
    throw Error(ErrorKind::ShapeMismatch, "dataset has " + std::to_string(data.n_features) +
                                              " features, model expects " + std::to_string(model.n_features));
  }
}

double batch_step(Network& net, const Dataset& data, std::span<const std::size_t> targets,
                  std::span<const std::size_t> rows, std::span<double> grad) {
  double loss = 0.0;
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  for (auto r : rows) {
    const auto probs = net.forward(data.row(r));
    loss -= std::log(std::max(probs[targets[r]], kProbabilityFloor));
    if (!grad.empty()) net.backward(targets[r], grad);
  }
  const double n = static_cast<double>(rows.size());
  if (!grad.empty()) {
    for (auto& g : grad) g /= n;
  }
  return loss / n;
}

}  // namespace

double loss_and_gradient(const Model& model, const Dataset& data, std::span<const std::size_t> rows,
                         std::span<double> grad) {
  check_width(model, data);
  if (rows.empty()) throw Error(ErrorKind::EmptyShard, "no rows");
  if (!grad.empty() && grad.size() != model.params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "gradient buffer does not match parameter count");
  }
  for (auto r : rows) {
    if (r >= data.size()) throw Error(ErrorKind::InvalidArgument, "row index out of range");
  }
  const auto targets = target_positions(model, data);
  Network net(model);
  return batch_step(net, data, targets, rows, grad);
}

TrainResult train(Model model, const Dataset& shard, const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (shard.empty()) throw Error(ErrorKind::EmptyShard, "cannot train on an empty shard");
  check_width(model, shard);
  const auto targets = target_positions(model, shard);

  TrainResult result{std::move(model), 0, {}};
  Model& m = result.model;
  Network net(m);
  AdamState adam = AdamState::zeros(m.params.size());
  std::vector<double> grad(m.params.size());
  std::vector<std::size_t> order(shard.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Xoshiro256 rng(seed);

  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      epoch_loss += batch_step(net, shard, targets, batch, grad) * static_cast<double>(len);
      adam_step(m.params, grad, adam, cfg.learning_rate, cfg.adam);
    }
    epoch_loss /= static_cast<double>(order.size());
    result.epoch_losses.push_back(epoch_loss);
    ++result.epochs_run;
    if (epoch_loss < best - cfg.early_stop.min_delta) {
      best = epoch_loss;
      stale = 0;
    } else if (++stale >= cfg.early_stop.patience) {
      break;
    }
  }
  return result;
}

ScoreMatrix predict_scores(const Model& model, const Dataset& data) {
  check_width(model, data);
  const std::size_t k = model.label_cols.size();
  std::vector<double> values(data.size() * k);
  Network net(model);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto probs = net.forward(data.row(r));
    std::copy(probs.begin(), probs.end(), values.begin() + static_cast<std::ptrdiff_t>(r * k));
  }
  return ScoreMatrix(data.size(), model.label_cols, std::move(values));
}

}  // namespace fedscore
