#include "fedscore/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <set>
#include <thread>

#include "fedscore/payload.hpp"
#include "fedscore/rng.hpp"

namespace fedscore {

const ArchSpec& ClientConfig::arch_at(int iteration) const {
  const ArchStage* current = nullptr;
  for (const auto& stage : arch_schedule) {
    if (stage.from_iteration <= iteration) current = &stage;
  }
  if (current == nullptr) {
    throw Error(ErrorKind::ConfigInvalid, "client '" + id + "' has no architecture for iteration " +
                                              std::to_string(iteration));
  }
  return current->arch;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigInvalid, msg); };
  if (label_space.size() == 0) fail("labels: at least one label is required");
  if (iterations < 1) fail("iterations: must be >= 1");
  if (parallel_workers < 1) fail("parallel_workers: must be >= 1");
  if (clients.empty()) fail("clients: at least one client is required");

  const bool synthetic = data.synthetic.has_value();
  const bool csv = !data.public_csv.empty() || !data.pool_csv.empty();
  if (synthetic == csv) fail("data: exactly one of 'synthetic' or 'public_csv'+'pool_csv' is required");
  if (synthetic) {
    try {
      data.synthetic->validate(label_space);
    } catch (const Error& e) {
      fail(std::string("data.synthetic: ") + e.message());
    }
    if (data.public_per_label < 1) fail("data.synthetic.public_per_label: must be >= 1");
  } else if (data.public_csv.empty() || data.pool_csv.empty()) {
    fail("data: both 'public_csv' and 'pool_csv' are required");
  }

  std::set<std::string> ids;
  std::set<LabelId> claimed;
  for (std::size_t m = 0; m < clients.size(); ++m) {
    const auto& c = clients[m];
    const std::string where = "clients[" + std::to_string(m) + "]";
    if (c.id.empty()) fail(where + ".id: must be non-empty");
    if (!ids.insert(c.id).second) fail(where + ".id: duplicate id '" + c.id + "'");
    if (c.labels.empty()) fail(where + ".labels: at least one label is required");
    for (auto l : c.labels) {
      if (l.value >= label_space.size()) fail(where + ".labels: label outside the label space");
      claimed.insert(l);
    }
    if (c.arch_schedule.empty()) fail(where + ".arch_schedule: at least one stage is required");
    if (c.arch_schedule.front().from_iteration != 1) fail(where + ".arch_schedule[0].from_iteration: must be 1");
    for (std::size_t s = 0; s < c.arch_schedule.size(); ++s) {
      if (s > 0 && c.arch_schedule[s].from_iteration <= c.arch_schedule[s - 1].from_iteration) {
        fail(where + ".arch_schedule[" + std::to_string(s) + "].from_iteration: must increase");
      }
      try {
        c.arch_schedule[s].arch.validate();
      } catch (const Error& e) {
        fail(where + ".arch_schedule[" + std::to_string(s) + "]: " + e.message());
      }
    }
    try {
      c.train.validate();
    } catch (const Error& e) {
      fail(where + ".train: " + e.message());
    }
    if (c.plan.labels != c.labels) fail(where + ": partition plan labels differ from client labels");
  }
  for (auto l : label_space.all()) {
    if (claimed.count(l) == 0) fail("labels: '" + label_space.name(l) + "' is not claimed by any client");
  }
  try {
    partition_plan().validate(label_space);
  } catch (const Error& e) {
    fail(std::string("clients: ") + e.message());
  }
}

PartitionPlan ExperimentConfig::partition_plan() const {
  PartitionPlan plan;
  for (const auto& c : clients) plan.clients.push_back(c.plan);
  return plan;
}

PreparedData prepare_data(const ExperimentConfig& config) {
  const LabelSpace& space = config.label_space;
  PreparedData out;
  if (config.data.synthetic) {
    out.pools = generate_synthetic(*config.data.synthetic, space, config.master_seed);
    SyntheticSpec public_spec = *config.data.synthetic;
    for (auto& d : public_spec.labels) d.pool_size = config.data.public_per_label;
    out.public_set = concat(generate_synthetic(public_spec, space, derive_seed(config.master_seed, {stream::kPublic})));
  } else {
    out.public_set = load_csv_dataset(config.data.public_csv, space);
    out.pools = split_by_label(load_csv_dataset(config.data.pool_csv, space), space);
    if (out.pools.front().n_features != out.public_set.n_features) {
      throw Error(ErrorKind::ConfigInvalid, "data: public and pool CSV files differ in feature count");
    }
  }

  std::vector<std::size_t> public_counts(space.size(), 0);
  for (auto y : out.public_set.labels) ++public_counts[y.value];
  for (auto l : space.all()) {
    if (public_counts[l.value] == 0) {
      throw Error(ErrorKind::ConfigInvalid, "data: public set has no example of label '" + space.name(l) + "'");
    }
    std::size_t claimants = 0;
    for (const auto& c : config.clients) claimants += std::count(c.labels.begin(), c.labels.end(), l);
    if (out.pools[l.value].size() < claimants) {
      throw Error(ErrorKind::ConfigInvalid, "data: pool of label '" + space.name(l) +
                                                "' is smaller than its number of claimants");
    }
  }

  if (config.standardize) {
    const FeatureScaling scaling = FeatureScaling::fit(out.public_set);
    scaling.apply(out.public_set);
    for (auto& pool : out.pools) scaling.apply(pool);
  }
  return out;
}

struct Simulator::LocalPhase {
  bool participated = false;
  std::optional<LocalRound> round;
  ClientRecord record;
  std::vector<ReshuffleEvent> reshuffles;
  std::optional<Model> model;
};

namespace {

ExperimentConfig checked(ExperimentConfig config) {
  config.validate();
  return config;
}

}  // namespace

Simulator::Simulator(ExperimentConfig config)
    : config_(checked(std::move(config))),
      data_(prepare_data(config_)),
      plan_(config_.partition_plan()),
      sampler_(data_.pools, plan_, config_.master_seed),
      previous_models_(config_.clients.size()) {}

Simulator::LocalPhase Simulator::run_client(const GlobalScoreState& state, std::size_t m, int iteration) {
  const ClientConfig& client = config_.clients[m];
  LocalPhase phase;
  Shard shard = sampler_.draw(m, iteration);
  phase.reshuffles = std::move(shard.reshuffles);
  if (shard.data.empty()) return phase;

  const ArchSpec& arch = client.arch_at(iteration);
  const auto it = static_cast<std::uint64_t>(iteration);
  Model model = config_.warm_start && previous_models_[m] && previous_models_[m]->arch == arch
                    ? *previous_models_[m]
                    : init_model(arch, data_.public_set.n_features, client.labels,
                                 derive_seed(config_.master_seed, {stream::kInit, m, it}));

  const auto start = std::chrono::steady_clock::now();
  TrainResult trained = train(std::move(model), shard.data, client.train,
                              derive_seed(config_.master_seed, {stream::kShuffle, m, it}));
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  ScoreMatrix fresh = predict_scores(trained.model, data_.public_set);
  const double a = alpha(shard.data.size(), data_.public_set.size());
  ScoreMatrix updated = local_update(state, fresh, a, client.labels);

  ClientRecord& rec = phase.record;
  rec.iteration = iteration;
  rec.client = m;
  rec.client_id = client.id;
  rec.arch = arch.describe();
  rec.alpha = a;
  rec.shard_size = shard.data.size();
  for (const auto& rows : shard.pool_rows) rec.shard_counts.push_back(rows.size());
  rec.epochs_run = trained.epochs_run;
  rec.final_train_loss = trained.epoch_losses.back();
  rec.local_update_accuracy = evaluate_user_accuracy(updated, data_.public_set, client.labels);
  rec.parameter_count = trained.model.parameter_count();
  rec.score_payload_bytes = score_payload_size(updated.rows(), updated.n_cols());
  rec.weight_payload_bytes = weight_payload_size(rec.parameter_count);
  rec.train_seconds = elapsed.count();

  phase.participated = true;
  phase.round = LocalRound{m, iteration, client.labels, std::move(fresh), std::move(updated), a, shard.data.size()};
  phase.model = std::move(trained.model);
  return phase;
}

IterationResult Simulator::run_iteration(const GlobalScoreState& state, int iteration) {
  if (state.iteration != iteration - 1) {
    throw Error(ErrorKind::InvalidArgument, "iteration " + std::to_string(iteration) +
                                                " cannot follow global state " + std::to_string(state.iteration));
  }
  const std::size_t n_clients = config_.clients.size();
  std::vector<std::optional<LocalPhase>> phases(n_clients);
  std::vector<std::exception_ptr> errors(n_clients);

  auto work = [&](std::size_t m) {
    try {
      phases[m] = run_client(state, m, iteration);
    } catch (const Error& e) {
      errors[m] = std::make_exception_ptr(Error(
          e.kind(), "client '" + config_.clients[m].id + "', iteration " + std::to_string(iteration) + ": " + e.message()));
    } catch (...) {
      errors[m] = std::current_exception();
    }
  };

  const std::size_t workers = std::min(config_.parallel_workers, n_clients);
  if (workers <= 1) {
    for (std::size_t m = 0; m < n_clients; ++m) work(m);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t m = next.fetch_add(1); m < n_clients; m = next.fetch_add(1)) work(m);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Barrier: aggregation runs once, in client order.
  IterationResult result{state, {}, {}, {}, {}};
  std::vector<std::size_t> owner;
  std::set<LabelId> claimed_set;
  for (std::size_t m = 0; m < n_clients; ++m) {
    LocalPhase& phase = *phases[m];
    result.reshuffles.insert(result.reshuffles.end(), phase.reshuffles.begin(), phase.reshuffles.end());
    if (!phase.participated) continue;
    claimed_set.insert(phase.round->labels.begin(), phase.round->labels.end());
    result.rounds.push_back(std::move(*phase.round));
    result.records.push_back(std::move(phase.record));
    owner.push_back(m);
    if (config_.warm_start) previous_models_[m] = std::move(phase.model);
  }

  if (result.rounds.empty()) {
    result.state.iteration = iteration;
  } else {
    const LabelSet claimed(claimed_set.begin(), claimed_set.end());
    const BetaAssignment betas = assign_beta(result.rounds, data_.public_set, claimed, config_.beta_acc);
    result.state = global_update(state, result.rounds, betas, config_.aggregate);
    for (std::size_t k = 0; k < result.records.size(); ++k) {
      auto& rec = result.records[k];
      rec.betas = betas.per_round[k];
      rec.global_update_accuracy =
          evaluate_user_accuracy(result.state.scores, data_.public_set, config_.clients[owner[k]].labels);
    }
  }
  result.summary = IterationRecord{iteration, result.rounds.size(),
                                   overall_accuracy(result.state.scores, data_.public_set)};
  return result;
}

ExperimentReport Simulator::run() {
  ExperimentReport report;
  report.label_space = config_.label_space;
  for (const auto& c : config_.clients) {
    report.client_ids.push_back(c.id);
    report.client_labels.push_back(c.labels);
  }
  report.iterations = config_.iterations;
  report.master_seed = config_.master_seed;
  report.aggregate = config_.aggregate;
  report.beta_acc = config_.beta_acc;
  report.public_size = data_.public_set.size();

  GlobalScoreState state = GlobalScoreState::initial(data_.public_set.size(), config_.label_space);
  for (int i = 1; i <= config_.iterations; ++i) {
    IterationResult r = run_iteration(state, i);
    report.records.insert(report.records.end(), r.records.begin(), r.records.end());
    report.iteration_records.push_back(r.summary);
    report.reshuffles.insert(report.reshuffles.end(), r.reshuffles.begin(), r.reshuffles.end());
    state = std::move(r.state);
  }
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config) { return Simulator(config).run(); }

SummaryTable summarize(const ExperimentReport& report) {
  SummaryTable table;
  for (const auto& id : report.client_ids) {
    UserSummary s{id};
    for (const auto& rec : report.records) {
      if (rec.client_id != id) continue;
      ++s.records;
      s.local_mean += rec.local_update_accuracy;
      s.global_mean += rec.global_update_accuracy;
    }
    if (s.records == 0) continue;
    s.local_mean /= static_cast<double>(s.records);
    s.global_mean /= static_cast<double>(s.records);
    s.increase = s.global_mean - s.local_mean;
    table.users.push_back(s);
  }
  table.average.user = "average";
  for (const auto& u : table.users) {
    table.average.records += u.records;
    table.average.local_mean += u.local_mean;
    table.average.global_mean += u.global_mean;
  }
  if (!table.users.empty()) {
    const double n = static_cast<double>(table.users.size());
    table.average.local_mean /= n;
    table.average.global_mean /= n;
    table.average.increase = table.average.global_mean - table.average.local_mean;
  }
  return table;
}

}  // namespace fedscore
