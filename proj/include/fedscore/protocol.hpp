#pragma once

// Score-consensus protocol: each client blends the previous global scores
// for its own labels with its fresh public-set predictions (weighted by
// alpha = |private shard| / |public set|); the coordinator then merges the
// updated columns label by label, weighting each contributor by beta (1 for
// a label only it holds, its public-set accuracy for a shared label).

#include <cstddef>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "fedscore/core.hpp"

namespace fedscore {

enum class AggregateMode { Normalized, Sum };
enum class BetaAccuracy { PerLabel, Subset };

std::string_view to_string(AggregateMode m);
std::string_view to_string(BetaAccuracy m);
AggregateMode parse_aggregate_mode(std::string_view s);
BetaAccuracy parse_beta_accuracy(std::string_view s);

using LabelValues = std::map<LabelId, double>;

/// Output of one client's local phase in one iteration.
struct LocalRound {
  std::size_t client = 0;
  int iteration = 0;
  LabelSet labels;        // l_m
  ScoreMatrix fresh;      // model output on the public set
  ScoreMatrix updated;    // after the alpha-weighted local update
  double alpha = 0.0;
  std::size_t shard_size = 0;
};

/// beta per (round, label), parallel to the rounds it was computed from.
struct BetaAssignment {
  std::vector<LabelValues> per_round;
};

/// shard_size / public_size as a 64-bit ratio.
double alpha(std::size_t shard_size, std::size_t public_size);

/// restrict(global, l_m) + alpha * fresh. Throws ShapeMismatch.
ScoreMatrix local_update(const GlobalScoreState& global, const ScoreMatrix& fresh, double alpha,
                         const LabelSet& client_labels);

/// Recall of each label in l_m on the public set, predicting by argmax over
/// the l_m columns. A label without public examples reports 0; configs that
/// allow this are rejected before a run starts.
LabelValues per_label_accuracy(const ScoreMatrix& updated, const Dataset& public_set, const LabelSet& client_labels);

/// Accuracy over public examples whose label is in l_m, predicting by argmax
/// over the l_m columns. Throws NoEligibleExamples.
double evaluate_user_accuracy(const ScoreMatrix& scores, const Dataset& public_set, const LabelSet& client_labels);

/// Accuracy over the whole public set with argmax over every column.
double overall_accuracy(const ScoreMatrix& scores, const Dataset& public_set);

/// beta = 1 for labels held by one participating round, otherwise the
/// round's accuracy (per-label recall or whole-subset accuracy) computed
/// from its updated scores. Throws UnclaimedLabel if some label in
/// `claimed_labels` has no participating round.
BetaAssignment assign_beta(std::span<const LocalRound> rounds, const Dataset& public_set,
                           const LabelSet& claimed_labels, BetaAccuracy mode = BetaAccuracy::PerLabel);

/// Label-wise beta-weighted merge of the rounds' updated columns into the
/// next global state. Normalized mode divides by the column's beta sum; a
/// column with no contributors or a zero beta sum keeps its previous value.
/// Throws NoParticipants when `rounds` is empty.
GlobalScoreState global_update(const GlobalScoreState& previous, std::span<const LocalRound> rounds,
                               const BetaAssignment& betas, AggregateMode mode = AggregateMode::Normalized);

}  // namespace fedscore
