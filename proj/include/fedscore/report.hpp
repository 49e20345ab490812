#pragma once

#include <filesystem>
#include <string>

#include "fedscore/simulator.hpp"

namespace fedscore {

/// report.json content. Wall-clock timings are left out so that equal
/// (config, seed) pairs serialize to identical bytes.
std::string serialize_report(const ExperimentReport& report);
/// Inverse of serialize_report (timings read back as zero). Throws ParseError.
ExperimentReport parse_report(const std::string& text);
ExperimentReport load_report(const std::filesystem::path& path);

// CSV views: UTF-8, LF, header row, accuracies with six decimals.
std::string accuracy_csv(const ExperimentReport& report);
std::string summary_csv(const SummaryTable& table);
std::string global_accuracy_csv(const ExperimentReport& report);
std::string payload_csv(const ExperimentReport& report);
std::string timing_csv(const ExperimentReport& report);

/// Writes report.json, accuracy.csv, summary.csv, global_accuracy.csv,
/// payload.csv and timing.csv into `out_dir` (created if needed). Throws IoError.
void emit_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

}  // namespace fedscore
