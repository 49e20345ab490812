// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any fail.
//
//   fedscore_acceptance --cli <path to fedscore> --work <scratch dir>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "fedscore/config.hpp"
#include "fedscore/learner.hpp"
#include "fedscore/payload.hpp"
#include "fedscore/protocol.hpp"
#include "fedscore/report.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace fedscore;
using namespace fedscore::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const fs::path kConfigs = fs::path(FEDSCORE_SOURCE_DIR) / "configs";

Outcome aggregation_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const Instance inst = random_instance(seed);
    const auto got = global_update(inst.previous, inst.rounds, inst.betas);
    const auto want = oracle_global(inst, AggregateMode::Normalized);
    for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, relative_error(got.scores.values()[i], want[i]));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 5.0, fmt("200 instances, max rel err %.3g, %.2fs", worst, secs)};
}

Outcome passthrough_and_scaling() {
  std::size_t columns_checked = 0;
  bool exact = true;
  double worst = 0.0;
  Xoshiro256 rng(404);
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const Instance inst = random_instance(seed);
    // Passthrough: a label held by one client with a nonzero beta is copied bit for bit.
    const auto next = global_update(inst.previous, inst.rounds, inst.betas);
    for (auto label : inst.space.all()) {
      std::size_t owners = 0, owner = 0;
      for (std::size_t m = 0; m < inst.rounds.size(); ++m) {
        if (inst.rounds[m].updated.has_column(label)) {
          ++owners;
          owner = m;
        }
      }
      if (owners != 1 || inst.betas.per_round[owner].at(label) == 0.0) continue;
      const auto got = next.scores.column(label);
      const auto want = inst.rounds[owner].updated.column(label);
      exact = exact && std::memcmp(got.data(), want.data(), got.size() * sizeof(double)) == 0;
      ++columns_checked;
    }
    // Scaling every beta of one label by c > 0 changes nothing.
    const LabelId target{static_cast<std::uint16_t>(rng.below(inst.space.size()))};
    const double c = rng.uniform(0.01, 100.0);
    BetaAssignment scaled = inst.betas;
    for (auto& b : scaled.per_round) {
      if (auto it = b.find(target); it != b.end()) it->second *= c;
    }
    const auto other = global_update(inst.previous, inst.rounds, scaled);
    for (std::size_t i = 0; i < next.scores.values().size(); ++i) {
      worst = std::max(worst, relative_error(other.scores.values()[i], next.scores.values()[i]));
    }
  }
  return {exact && worst <= 1e-12 && columns_checked > 0,
          fmt("%zu unique columns bit-exact=%s, scaling max rel err %.3g", columns_checked, exact ? "yes" : "no",
              worst)};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t softmax_layers = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const GradientCase gc = random_gradient_case(seed);
    for (const auto& l : gc.model.arch.hidden) softmax_layers += l.activation == Activation::Softmax;
    worst = std::max(worst, max_gradient_error(gc));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 10.0 && softmax_layers > 0,
          fmt("20 networks (%zu softmax hidden layers), max rel err %.3g, %.2fs", softmax_layers, worst, secs)};
}

struct PaperRun {
  std::vector<ExperimentReport> reports;
  double seconds = 0.0;
};

PaperRun run_paper_config() {
  PaperRun out;
  const auto t0 = Clock::now();
  ExperimentConfig cfg = parse_config(kConfigs / "table1.json");
  const std::uint64_t base = cfg.master_seed;
  for (std::uint64_t k = 0; k < 3; ++k) {
    cfg.master_seed = base + k;
    out.reports.push_back(run_experiment(cfg));
  }
  out.seconds = seconds_since(t0);
  return out;
}

Outcome paper_experiment(const PaperRun& run) {
  std::map<std::string, std::pair<double, double>> per_user;  // summed local, global means
  double local = 0.0, global = 0.0;
  for (const auto& r : run.reports) {
    const SummaryTable t = summarize(r);
    for (const auto& u : t.users) {
      per_user[u.user].first += u.local_mean / 3.0;
      per_user[u.user].second += u.global_mean / 3.0;
    }
    local += t.average.local_mean / 3.0;
    global += t.average.global_mean / 3.0;
  }
  bool every_user = true;
  std::string users;
  for (const auto& [id, lg] : per_user) {
    every_user = every_user && lg.second > lg.first;
    users += fmt(" %s %+.2f", id.c_str(), 100.0 * (lg.second - lg.first));
  }
  const double gap = 100.0 * (global - local);
  return {gap >= 5.0 && every_user && run.seconds < 180.0,
          fmt("local %.2f%% global %.2f%% gap %+.2f pts (need >= 5), per user:", 100.0 * local, 100.0 * global, gap) +
              users + fmt(", %.1fs for 3 seeds", run.seconds)};
}

Outcome early_stopping(const PaperRun& run) {
  int most = 0;
  std::size_t records = 0;
  for (const auto& r : run.reports) {
    for (const auto& rec : r.records) {
      most = std::max(most, rec.epochs_run);
      ++records;
    }
  }
  const int limit = parse_config(kConfigs / "table1.json").clients.front().train.max_epochs;
  return {limit == 5 && most <= 5 && records > 0, fmt("%zu train calls, max epochs_run %d", records, most)};
}

Outcome cli_determinism(const std::string& cli, const fs::path& work) {
  const std::string config = (kConfigs / "table1.json").string();
  auto run = [&](const std::string& out, int workers) {
    const std::string cmd = "\"" + cli + "\" run --config \"" + config + "\" --out \"" + (work / out).string() +
                            "\" --seed 99 --workers " + std::to_string(workers) + " > /dev/null";
    return std::system(cmd.c_str());
  };
  if (run("det_a", 1) != 0 || run("det_b", 1) != 0 || run("det_c", 4) != 0) return {false, "cli run failed"};
  const std::string a = read_file(work / "det_a" / "report.json");
  const std::string b = read_file(work / "det_b" / "report.json");
  const std::string c = read_file(work / "det_c" / "report.json");
  return {!a.empty() && a == b && a == c,
          fmt("report.json %zu bytes; repeat identical=%s, workers 1 vs 4 identical=%s", a.size(),
              a == b ? "yes" : "no", a == c ? "yes" : "no")};
}

Outcome loss_and_optimizer_oracles() {
  const LabelSet four{LabelId{0}, LabelId{1}, LabelId{2}, LabelId{3}};
  const ScoreMatrix uniform(4, four, std::vector<double>(16, 0.25));
  const std::vector<LabelId> y{LabelId{0}, LabelId{1}, LabelId{2}, LabelId{3}};
  const double ce_err = std::abs(cross_entropy(uniform, y) - std::log(4.0));

  std::vector<double> p{0.5};
  AdamState st = AdamState::zeros(1);
  adam_step(p, std::vector<double>{0.1}, st, 0.001, AdamHyper{});
  const double step_err = std::abs(std::abs(0.5 - p[0]) - 0.001);
  return {ce_err <= 1e-9 && step_err <= 1e-6, fmt("|CE - ln4| = %.3g, ||step| - lr| = %.3g", ce_err, step_err)};
}

Outcome bandwidth(const PaperRun& run) {
  std::size_t records = 0, violations = 0, configs = 0;
  auto scan = [&](const ExperimentReport& r) {
    for (const auto& rec : r.records) {
      ++records;
      violations += rec.score_payload_bytes >= rec.weight_payload_bytes;
    }
  };
  for (const auto& r : run.reports) scan(r);
  ++configs;
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() != ".json" || name == "table1.json" || name == "gen_data_spec.json") continue;
    scan(run_experiment(parse_config(entry.path())));
    ++configs;
  }
  return {violations == 0 && records > 0,
          fmt("%zu configs, %zu records, %zu with score >= weight bytes", configs, records, violations)};
}

Outcome payload_codec() {
  Xoshiro256 rng(909);
  std::size_t mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    LabelSet cols;
    for (std::uint16_t k = 0; k < 8; ++k) {
      if (rng.uniform() < 0.5) cols.push_back(LabelId{k});
    }
    if (cols.empty()) cols.push_back(LabelId{0});
    const ScoreMatrix s = random_scores(rng, 1 + rng.below(50), cols, -10.0, 10.0);
    mismatches += !(decode_score_payload(encode_score_payload(s)) == quantize_f32(s));
  }
  // magic 4 + version 2 + rows 4 + cols 2 + 2 column bytes, padded to 16, then 2000*2 float32.
  const std::size_t expected = 4 + 2 + 4 + 2 + 2 + 2 + 2000 * 2 * 4;
  const ScoreMatrix big(2000, {LabelId{0}, LabelId{1}}, std::vector<double>(4000, 0.25));
  const std::size_t got = encode_score_payload(big).size();
  return {mismatches == 0 && got == expected && score_payload_size(2000, 2) == expected,
          fmt("100 round trips, %zu mismatches; 2000x2 payload %zu bytes (expected %zu)", mismatches, got, expected)};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "fedscore_acceptance";
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::strcmp(argv[i], "--cli") == 0) cli = argv[i + 1];
    if (std::strcmp(argv[i], "--work") == 0) work = argv[i + 1];
  }
  if (cli.empty()) {
    std::cerr << "usage: fedscore_acceptance --cli <fedscore binary> [--work <dir>]\n";
    return 2;
  }
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << name << "): " << o.detail << std::endl;
  };

  PaperRun paper;
  std::string paper_error;
  try {
    paper = run_paper_config();
  } catch (const std::exception& e) {
    paper_error = e.what();
  }
  auto needs_paper = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!paper_error.empty()) return {false, "shipped config failed: " + paper_error};
      return fn(paper);
    };
  };

  report(1, "aggregation oracle", aggregation_oracle);
  report(2, "passthrough and beta scaling", passthrough_and_scaling);
  report(3, "gradient check", gradient_check);
  report(4, "scaled experiment", needs_paper(paper_experiment));
  report(5, "early stopping", needs_paper(early_stopping));
  report(6, "determinism", [&] { return cli_determinism(cli, work); });
  report(7, "loss and optimizer oracles", loss_and_optimizer_oracles);
  report(8, "bandwidth", needs_paper(bandwidth));
  report(9, "payload codec", payload_codec);

  std::cout << (failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
