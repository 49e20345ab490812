// Shared fixtures for the unit tests and the acceptance runner.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedscore/core.hpp"
#include "fedscore/learner.hpp"
#include "fedscore/protocol.hpp"
#include "fedscore/rng.hpp"

namespace fedscore::testing {

/// Runs `fn` and returns the kind of the fedscore::Error it throws.
template <class Fn>
std::optional<ErrorKind> kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline LabelSpace make_space(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < n; ++k) names.push_back("l" + std::to_string(k));
  return LabelSpace(names);
}

inline ScoreMatrix random_scores(Xoshiro256& rng, std::size_t rows, LabelSet cols, double lo = -1.0,
                                 double hi = 1.0) {
  std::vector<double> v(rows * cols.size());
  for (auto& x : v) x = rng.uniform(lo, hi);
  return ScoreMatrix(rows, std::move(cols), std::move(v));
}

/// A random aggregation problem: up to 4 clients, 6 labels, 20 public rows.
struct Instance {
  LabelSpace space;
  GlobalScoreState previous;
  std::vector<LocalRound> rounds;
  BetaAssignment betas;
};

inline Instance random_instance(std::uint64_t seed) {
  Xoshiro256 rng(seed);
  const std::size_t n_labels = 1 + rng.below(6);
  const std::size_t n_clients = 1 + rng.below(4);
  const std::size_t rows = 1 + rng.below(20);
  const LabelSpace space = make_space(n_labels);
  Instance inst{space,
                GlobalScoreState{static_cast<int>(rng.below(5)), random_scores(rng, rows, space.all())},
                {},
                {}};
  for (std::size_t m = 0; m < n_clients; ++m) {
    LabelSet labels;
    for (auto l : space.all()) {
      if (rng.uniform() < 0.5) labels.push_back(l);
    }
    if (labels.empty()) labels.push_back(LabelId{static_cast<std::uint16_t>(rng.below(n_labels))});
    ScoreMatrix fresh = random_scores(rng, rows, labels, 0.0, 1.0);
    const double a = rng.uniform(0.0, 2.0);
    ScoreMatrix updated = local_update(inst.previous, fresh, a, labels);
    LabelValues b;
    for (auto l : labels) b[l] = rng.uniform() < 0.1 ? 0.0 : rng.uniform();
    inst.betas.per_round.push_back(std::move(b));
    inst.rounds.push_back(
        LocalRound{m, inst.previous.iteration + 1, labels, std::move(fresh), std::move(updated), a, rows});
  }
  return inst;
}

/// Brute-force weighted average, written without the library's column helpers.
inline std::vector<double> oracle_global(const Instance& inst, AggregateMode mode) {
  const std::size_t rows = inst.previous.scores.rows();
  const std::size_t cols = inst.space.size();
  std::vector<double> out(rows * cols);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) {
      double num = 0.0;
      double den = 0.0;
      bool any = false;
      for (std::size_t m = 0; m < inst.rounds.size(); ++m) {
        const LocalRound& round = inst.rounds[m];
        for (std::size_t k = 0; k < round.labels.size(); ++k) {
          if (round.labels[k].value != c) continue;
          const double beta = inst.betas.per_round[m].at(round.labels[k]);
          num += beta * round.updated.values()[r * round.labels.size() + k];
          den += beta;
          any = true;
        }
      }
      const double prev = inst.previous.scores.values()[r * cols + c];
      // No contributor, or all betas zero: the previous value carries over in both modes.
      if (!any || den == 0.0) {
        out[r * cols + c] = prev;
      } else {
        out[r * cols + c] = mode == AggregateMode::Sum ? num : num / den;
      }
    }
  }
  return out;
}

inline double relative_error(double got, double want) {
  const double scale = std::max({std::abs(got), std::abs(want), 1e-300});
  return std::abs(got - want) / scale;
}

/// Random network of 0..3 hidden layers (1..8 units each, any activation)
/// with a small random dataset over its output labels.
struct GradientCase {
  Model model;
  Dataset data;
};

inline GradientCase random_gradient_case(std::uint64_t seed) {
  Xoshiro256 rng(seed);
  ArchSpec arch;
  const std::size_t depth = rng.below(4);
  for (std::size_t l = 0; l < depth; ++l) {
    arch.hidden.push_back({1 + rng.below(8), static_cast<Activation>(rng.below(3))});
  }
  const std::size_t n_features = 1 + rng.below(5);
  const std::size_t n_out = 2 + rng.below(3);
  LabelSet cols;
  for (std::size_t k = 0; k < n_out; ++k) cols.push_back(LabelId{static_cast<std::uint16_t>(2 * k + 1)});
  GradientCase gc{init_model(arch, n_features, cols, rng()), Dataset{}};
  // Nonzero biases so that every parameter's gradient is exercised.
  for (auto& p : gc.model.params) p += rng.uniform(-0.3, 0.3);
  gc.data.n_features = n_features;
  std::vector<double> x(n_features);
  const std::size_t rows = 3 + rng.below(6);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& v : x) v = rng.uniform(-2.0, 2.0);
    gc.data.append(x, cols[rng.below(n_out)]);
  }
  return gc;
}

/// Largest relative error between the analytic gradient and central finite
/// differences with step h, over every parameter.
inline double max_gradient_error(const GradientCase& gc, double h = 1e-5) {
  std::vector<std::size_t> rows(gc.data.size());
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
  std::vector<double> grad(gc.model.parameter_count());
  loss_and_gradient(gc.model, gc.data, rows, grad);
  Model probe = gc.model;
  double worst = 0.0;
  for (std::size_t p = 0; p < grad.size(); ++p) {
    const double keep = probe.params[p];
    probe.params[p] = keep + h;
    const double up = loss_and_gradient(probe, gc.data, rows, {});
    probe.params[p] = keep - h;
    const double down = loss_and_gradient(probe, gc.data, rows, {});
    probe.params[p] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(grad[p]), std::abs(numeric), 1e-7});
    worst = std::max(worst, std::abs(grad[p] - numeric) / denom);
  }
  return worst;
}

}  // namespace fedscore::testing
