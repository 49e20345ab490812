#include "fedscore/protocol.hpp"

#include <algorithm>
#include <string>

#include "fedscore/kernels.hpp"

namespace fedscore {

std::string_view to_string(AggregateMode m) { return m == AggregateMode::Sum ? "sum" : "normalized"; }
std::string_view to_string(BetaAccuracy m) { return m == BetaAccuracy::Subset ? "subset" : "per_label"; }

AggregateMode parse_aggregate_mode(std::string_view s) {
  if (s == "normalized") return AggregateMode::Normalized;
  if (s == "sum") return AggregateMode::Sum;
  throw Error(ErrorKind::InvalidArgument, "aggregate must be 'normalized' or 'sum', got '" + std::string(s) + "'");
}

BetaAccuracy parse_beta_accuracy(std::string_view s) {
  if (s == "per_label") return BetaAccuracy::PerLabel;
  if (s == "subset") return BetaAccuracy::Subset;
  throw Error(ErrorKind::InvalidArgument, "beta_acc must be 'per_label' or 'subset', got '" + std::string(s) + "'");
}

double alpha(std::size_t shard_size, std::size_t public_size) {
  if (public_size == 0) throw Error(ErrorKind::InvalidArgument, "public set is empty");
  return static_cast<double>(shard_size) / static_cast<double>(public_size);
}

ScoreMatrix local_update(const GlobalScoreState& global, const ScoreMatrix& fresh, double alpha,
                         const LabelSet& client_labels) {
  LabelSet labels = client_labels;
  std::sort(labels.begin(), labels.end());
  if (fresh.cols() != labels) throw Error(ErrorKind::ShapeMismatch, "fresh scores must cover exactly l_m");
  if (fresh.rows() != global.scores.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "fresh scores and global state differ in row count");
  }
  const ScoreMatrix prior = restrict_columns(global.scores, labels);
  std::vector<double> out(prior.values().size());
  kernels::add_scaled(prior.values(), alpha, fresh.values(), out);
  return ScoreMatrix(prior.rows(), std::move(labels), std::move(out));
}

namespace {

void check_cover(const ScoreMatrix& scores, const Dataset& public_set, const LabelSet& labels) {
  if (scores.rows() != public_set.size()) {
    throw Error(ErrorKind::ShapeMismatch, "scores do not cover the public set");
  }
  for (auto l : labels) {
    if (!scores.has_column(l)) throw Error(ErrorKind::ShapeMismatch, "scores lack a column of l_m");
  }
}

}  // namespace

LabelValues per_label_accuracy(const ScoreMatrix& updated, const Dataset& public_set, const LabelSet& client_labels) {
  LabelSet labels = client_labels;
  std::sort(labels.begin(), labels.end());
  check_cover(updated, public_set, labels);
  const ScoreMatrix view = restrict_columns(updated, labels);
  std::map<LabelId, std::pair<std::size_t, std::size_t>> tally;  // label -> (correct, total)
  for (auto l : labels) tally[l] = {0, 0};
  for (std::size_t r = 0; r < public_set.size(); ++r) {
    auto it = tally.find(public_set.labels[r]);
    if (it == tally.end()) continue;
    ++it->second.second;
    if (argmax_label(view.row(r), labels) == it->first) ++it->second.first;
  }
  LabelValues out;
  for (const auto& [label, counts] : tally) {
    out[label] = counts.second == 0 ? 0.0
                                    : static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return out;
}

double evaluate_user_accuracy(const ScoreMatrix& scores, const Dataset& public_set, const LabelSet& client_labels) {
  LabelSet labels = client_labels;
  std::sort(labels.begin(), labels.end());
  check_cover(scores, public_set, labels);
  const ScoreMatrix view = restrict_columns(scores, labels);
  std::size_t eligible = 0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < public_set.size(); ++r) {
    const LabelId y = public_set.labels[r];
    if (!std::binary_search(labels.begin(), labels.end(), y)) continue;
    ++eligible;
    if (argmax_label(view.row(r), labels) == y) ++correct;
  }
  if (eligible == 0) throw Error(ErrorKind::NoEligibleExamples, "no public example carries a label of l_m");
  return static_cast<double>(correct) / static_cast<double>(eligible);
}

double overall_accuracy(const ScoreMatrix& scores, const Dataset& public_set) {
  if (scores.rows() != public_set.size()) throw Error(ErrorKind::ShapeMismatch, "scores do not cover the public set");
  if (public_set.empty()) throw Error(ErrorKind::NoEligibleExamples, "public set is empty");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < public_set.size(); ++r) {
    if (argmax_label(scores.row(r), scores.cols()) == public_set.labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(public_set.size());
}

BetaAssignment assign_beta(std::span<const LocalRound> rounds, const Dataset& public_set,
                           const LabelSet& claimed_labels, BetaAccuracy mode) {
  std::map<LabelId, std::size_t> holders;
  for (const auto& round : rounds) {
    for (auto l : round.labels) ++holders[l];
  }
  for (auto l : claimed_labels) {
    if (holders.count(l) == 0) {
      throw Error(ErrorKind::UnclaimedLabel,
                  "label index " + std::to_string(l.value) + " has no participating client");
    }
  }

  BetaAssignment out;
  out.per_round.reserve(rounds.size());
  for (const auto& round : rounds) {
    LabelValues betas;
    const bool shares_any =
        std::any_of(round.labels.begin(), round.labels.end(), [&](LabelId l) { return holders[l] > 1; });
    LabelValues recall;
    double subset = 0.0;
    if (shares_any) {
      if (mode == BetaAccuracy::PerLabel) {
        recall = per_label_accuracy(round.updated, public_set, round.labels);
      } else {
        subset = evaluate_user_accuracy(round.updated, public_set, round.labels);
      }
    }
    for (auto l : round.labels) {
      if (holders[l] == 1) {
        betas[l] = 1.0;
      } else {
        betas[l] = mode == BetaAccuracy::PerLabel ? recall.at(l) : subset;
      }
    }
    out.per_round.push_back(std::move(betas));
  }
  return out;
}

GlobalScoreState global_update(const GlobalScoreState& previous, std::span<const LocalRound> rounds,
                               const BetaAssignment& betas, AggregateMode mode) {
  if (rounds.empty()) throw Error(ErrorKind::NoParticipants, "no client participated in this iteration");
  if (betas.per_round.size() != rounds.size()) {
    throw Error(ErrorKind::ShapeMismatch, "one beta map per round required");
  }
  const ScoreMatrix& prev = previous.scores;
  const std::size_t rows = prev.rows();
  for (const auto& round : rounds) {
    if (round.updated.rows() != rows) throw Error(ErrorKind::ShapeMismatch, "updated scores differ in row count");
  }

  const std::size_t n_cols = prev.n_cols();
  std::vector<double> next(prev.values().begin(), prev.values().end());
  std::vector<double> acc(rows);
  for (std::size_t c = 0; c < n_cols; ++c) {
    const LabelId label = prev.cols()[c];
    std::vector<std::pair<std::size_t, double>> contributors;  // (round, beta)
    for (std::size_t k = 0; k < rounds.size(); ++k) {
      if (!rounds[k].updated.has_column(label)) continue;
      auto it = betas.per_round[k].find(label);
      if (it == betas.per_round[k].end()) {
        throw Error(ErrorKind::ShapeMismatch, "missing beta for a participating label");
      }
      contributors.emplace_back(k, it->second);
    }
    double beta_sum = 0.0;
    for (const auto& [k, b] : contributors) beta_sum += b;
    if (contributors.empty() || beta_sum == 0.0) continue;  // carry the previous column

    std::fill(acc.begin(), acc.end(), 0.0);
    std::size_t weighted = 0;
    for (const auto& [k, b] : contributors) {
      if (b == 0.0) continue;
      ++weighted;
      const auto column = rounds[k].updated.column(label);
      kernels::axpy(b, column, acc);
    }
    if (mode == AggregateMode::Normalized) {
      if (weighted == 1) {
        // A lone contributor passes through unchanged.
        for (const auto& [k, b] : contributors) {
          if (b != 0.0) acc = rounds[k].updated.column(label);
        }
      } else {
        for (auto& v : acc) v /= beta_sum;
      }
    }
    for (std::size_t r = 0; r < rows; ++r) next[r * n_cols + c] = acc[r];
  }
  return GlobalScoreState{previous.iteration + 1, ScoreMatrix(rows, prev.cols(), std::move(next))};
}

}  // namespace fedscore
