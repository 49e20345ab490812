#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedscore/core.hpp"
#include "fedscore/data.hpp"
#include "fedscore/learner.hpp"
#include "fedscore/protocol.hpp"

namespace fedscore {

/// Where the public set and the private label pools come from.
struct DataSource {
  /// Synthetic: pools of SyntheticSpec::labels[k].pool_size rows plus a
  /// separately drawn public set of `public_per_label` rows per label.
  std::optional<SyntheticSpec> synthetic;
  std::size_t public_per_label = 0;
  /// CSV: both files in the `label,f0,...` format.
  std::filesystem::path public_csv;
  std::filesystem::path pool_csv;
};

/// Architecture in force from `from_iteration` until the next stage.
struct ArchStage {
  int from_iteration = 1;
  ArchSpec arch;
};

struct ClientConfig {
  std::string id;
  LabelSet labels;  // l_m
  std::vector<ArchStage> arch_schedule;
  TrainConfig train;
  ClientPlan plan;

  const ArchSpec& arch_at(int iteration) const;
};

struct ExperimentConfig {
  LabelSpace label_space;
  DataSource data;
  std::vector<ClientConfig> clients;
  int iterations = 0;
  std::uint64_t master_seed = 0;
  AggregateMode aggregate = AggregateMode::Normalized;
  BetaAccuracy beta_acc = BetaAccuracy::PerLabel;
  bool warm_start = false;
  bool standardize = true;
  std::size_t parallel_workers = 1;

  /// Structural checks that need no data; throws ConfigInvalid.
  void validate() const;
  PartitionPlan partition_plan() const;
};

struct ClientRecord {
  int iteration = 0;
  std::size_t client = 0;
  std::string client_id;
  std::string arch;
  double alpha = 0.0;
  std::size_t shard_size = 0;
  std::vector<std::size_t> shard_counts;  // parallel to the client's labels
  int epochs_run = 0;
  double final_train_loss = 0.0;
  double local_update_accuracy = 0.0;
  double global_update_accuracy = 0.0;
  LabelValues betas;
  std::size_t parameter_count = 0;
  std::size_t score_payload_bytes = 0;
  std::size_t weight_payload_bytes = 0;
  double train_seconds = 0.0;  // wall clock; informational only
};

struct IterationRecord {
  int iteration = 0;
  std::size_t participants = 0;
  double global_accuracy = 0.0;  // argmax over all labels, whole public set
};

struct ExperimentReport {
  LabelSpace label_space;
  std::vector<std::string> client_ids;
  std::vector<LabelSet> client_labels;
  int iterations = 0;
  std::uint64_t master_seed = 0;
  AggregateMode aggregate = AggregateMode::Normalized;
  BetaAccuracy beta_acc = BetaAccuracy::PerLabel;
  std::size_t public_size = 0;
  std::vector<ClientRecord> records;
  std::vector<IterationRecord> iteration_records;
  std::vector<ReshuffleEvent> reshuffles;
};

struct IterationResult {
  GlobalScoreState state;
  std::vector<ClientRecord> records;
  std::vector<LocalRound> rounds;
  IterationRecord summary;
  std::vector<ReshuffleEvent> reshuffles;
};

/// Public set (standardized when configured) and per-label private pools.
struct PreparedData {
  Dataset public_set;
  LabelPools pools;
};

PreparedData prepare_data(const ExperimentConfig& config);

/// Drives the iteration loop for one configuration. The local phase of the
/// clients runs on up to `parallel_workers` threads; every random stream is
/// derived from (master_seed, client, iteration), so the result does not
/// depend on the worker count.
class Simulator {
 public:
  explicit Simulator(ExperimentConfig config);
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  IterationResult run_iteration(const GlobalScoreState& state, int iteration);
  ExperimentReport run();

  const ExperimentConfig& config() const noexcept { return config_; }
  const Dataset& public_set() const noexcept { return data_.public_set; }

 private:
  struct LocalPhase;
  LocalPhase run_client(const GlobalScoreState& state, std::size_t client, int iteration);

  ExperimentConfig config_;
  PreparedData data_;
  PartitionPlan plan_;
  ShardSampler sampler_;
  std::vector<std::optional<Model>> previous_models_;
};

ExperimentReport run_experiment(const ExperimentConfig& config);

struct UserSummary {
  std::string user;
  std::size_t records = 0;
  double local_mean = 0.0;
  double global_mean = 0.0;
  double increase = 0.0;
};

struct SummaryTable {
  std::vector<UserSummary> users;
  UserSummary average;  // unweighted mean over users
};

/// Per-user means of local and global update accuracy; users without
/// records are omitted.
SummaryTable summarize(const ExperimentReport& report);

}  // namespace fedscore
