#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <vector>

#include "fedscore/core.hpp"

namespace fedscore {

/// Diagonal Gaussian for one label.
struct LabelDistribution {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::size_t pool_size = 0;
};

/// Synthetic feature-vector stand-in for an image corpus: one diagonal
/// Gaussian per label, indexed by LabelId.
struct SyntheticSpec {
  std::size_t n_features = 0;
  std::vector<LabelDistribution> labels;

  /// Throws InvalidSpec.
  void validate(const LabelSpace& space) const;
};

/// One Dataset per label, indexed by LabelId.
using LabelPools = std::vector<Dataset>;

LabelPools generate_synthetic(const SyntheticSpec& spec, const LabelSpace& space, std::uint64_t seed);
Dataset concat(const LabelPools& pools);
LabelPools split_by_label(const Dataset& data, const LabelSpace& space);

Dataset parse_csv_dataset(std::istream& in, const LabelSpace& space);
Dataset load_csv_dataset(const std::filesystem::path& path, const LabelSpace& space);
void write_csv_dataset(std::ostream& out, const Dataset& data, const LabelSpace& space);

/// Per-feature affine map to zero mean / unit variance, fitted on one dataset
/// and applied to others.
struct FeatureScaling {
  std::vector<double> mean;
  std::vector<double> inv_std;

  static FeatureScaling fit(const Dataset& reference);
  void apply(Dataset& data) const;
};

/// Shard sizes of one client across iterations.
struct ClientPlan {
  LabelSet labels;                                       // l_m, label order
  std::vector<std::size_t> base_counts;                  // parallel to `labels`
  std::map<int, std::vector<std::size_t>> count_overrides;  // iteration -> counts
  std::map<int, std::vector<double>> skew;               // iteration -> multipliers
  double random_skew = 0.0;  // multipliers ~ U[1-s, 1+s] where no explicit skew is given
};

struct PartitionPlan {
  std::vector<ClientPlan> clients;

  /// Per-label counts for (client, iteration), after skew renormalization to
  /// the iteration's total.
  std::vector<std::size_t> counts(std::size_t client, int iteration, std::uint64_t seed) const;
  void validate(const LabelSpace& space) const;
};

struct ReshuffleEvent {
  int iteration = 0;
  std::size_t client = 0;
  LabelId label;
  std::size_t generation = 0;  // 1 = first reshuffle of this slice

  bool operator==(const ReshuffleEvent&) const = default;
};

struct Shard {
  Dataset data;
  /// Pool row indices drawn for each label of the client (parallel to ClientPlan::labels).
  std::vector<std::vector<std::size_t>> pool_rows;
  std::vector<ReshuffleEvent> reshuffles;
};

/// Streams disjoint private shards out of the label pools.
///
/// Each label pool is dealt round-robin to the clients that claim the label.
/// A client consumes its slice as a sequence of seeded permutations; running
/// past the end of one permutation starts a freshly shuffled one and records
/// a ReshuffleEvent. draw() is a pure function of (pools, plan, seed, client,
/// iteration).
class ShardSampler {
 public:
  ShardSampler(const LabelPools& pools, const PartitionPlan& plan, std::uint64_t seed);

  Shard draw(std::size_t client, int iteration) const;

  /// Pool row indices dealt to (client, label position in l_m).
  const std::vector<std::size_t>& slice(std::size_t client, std::size_t label_pos) const {
    return slices_.at(client).at(label_pos);
  }

 private:
  const LabelPools* pools_;
  const PartitionPlan* plan_;
  std::uint64_t seed_;
  std::vector<std::vector<std::vector<std::size_t>>> slices_;
};

Shard draw_shard(const LabelPools& pools, const PartitionPlan& plan, std::size_t client, int iteration,
                 std::uint64_t seed);

}  // namespace fedscore
