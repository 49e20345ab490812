// fedscore: command-line front end for the score-consensus simulator.
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fedscore/config.hpp"
#include "fedscore/data.hpp"
#include "fedscore/report.hpp"
#include "fedscore/simulator.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::uint64_t parse_seed(const std::string& text, const char* what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text.front() == '-') {
    throw fedscore::Error(fedscore::ErrorKind::InvalidArgument,
                          std::string(what) + " is not an unsigned 64-bit integer: '" + text + "'");
  }
  return v;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const std::optional<std::string>& seed,
            const std::optional<std::size_t>& workers) {
  fedscore::ExperimentConfig config = fedscore::parse_config(config_path);
  if (seed) {
    config.master_seed = parse_seed(*seed, "--seed");
  } else if (const char* env = std::getenv("FEDSCORE_SEED"); env != nullptr && *env != '\0') {
    config.master_seed = parse_seed(env, "FEDSCORE_SEED");
  }
  if (workers) {
    if (*workers == 0) throw fedscore::Error(fedscore::ErrorKind::InvalidArgument, "--workers must be >= 1");
    config.parallel_workers = *workers;
  }
  const fedscore::ExperimentReport report = fedscore::run_experiment(config);
  fedscore::emit_report(report, out_dir);
  std::cout << fedscore::summary_csv(fedscore::summarize(report));
  return 0;
}

int cmd_validate(const std::string& config_path) {
  const fedscore::ExperimentConfig config = fedscore::parse_config(config_path);
  std::cout << config_path << ": ok (" << config.clients.size() << " clients, " << config.iterations
            << " iterations, " << config.label_space.size() << " labels)\n";
  return 0;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_path, const std::string& seed) {
  const fedscore::GenDataSpec spec = fedscore::parse_gen_data_spec(spec_path);
  const auto pools = fedscore::generate_synthetic(spec.synthetic, spec.label_space, parse_seed(seed, "--seed"));
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw fedscore::Error(fedscore::ErrorKind::IoError, "cannot write '" + out_path + "'");
  fedscore::write_csv_dataset(out, fedscore::concat(pools), spec.label_space);
  out.close();
  if (!out) throw fedscore::Error(fedscore::ErrorKind::IoError, "failed writing '" + out_path + "'");
  return 0;
}

int cmd_summarize(const std::string& report_path) {
  const fedscore::ExperimentReport report = fedscore::load_report(report_path);
  std::cout << fedscore::summary_csv(fedscore::summarize(report));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-consensus federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, spec_path, report_path, gen_seed;
  std::optional<std::string> run_seed;
  std::optional<std::size_t> workers;

  auto* run = app.add_subcommand("run", "Run an experiment and write its reports");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", run_seed, "Master seed; overrides the config and FEDSCORE_SEED");
  run->add_option("--workers", workers, "Client worker threads");

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("--config", config_path, "Experiment config (JSON)")->required();

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic labelled dataset as CSV");
  gen->add_option("--spec", spec_path, "Synthetic data spec (JSON)")->required();
  gen->add_option("--out", out_dir, "Output CSV path")->required();
  gen->add_option("--seed", gen_seed, "Generator seed")->required();

  auto* summarize = app.add_subcommand("summarize", "Print the per-user summary of a report.json");
  summarize->add_option("--report", report_path, "Path to report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitRuntime;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, run_seed, workers);
    if (*validate) return cmd_validate(config_path);
    if (*gen) return cmd_gen_data(spec_path, out_dir, gen_seed);
    if (*summarize) return cmd_summarize(report_path);
  } catch (const fedscore::Error& e) {
    std::cerr << "fedscore: " << e.what() << '\n';
    return e.kind() == fedscore::ErrorKind::ConfigInvalid ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "fedscore: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
