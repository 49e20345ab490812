#pragma once

#include <filesystem>
#include <string>

#include "fedscore/simulator.hpp"

namespace fedscore {

/// Parses and validates an experiment config (see docs/config.md). Relative
/// CSV paths resolve against `base_dir`. Unknown keys are rejected. Throws
/// ConfigInvalid naming the offending key path.
ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig parse_config(const std::filesystem::path& path);

/// A stand-alone synthetic data spec as used by `gen-data`:
/// {"labels": [...], "synthetic": {...}}.
struct GenDataSpec {
  LabelSpace label_space;
  SyntheticSpec synthetic;
};
GenDataSpec parse_gen_data_spec(const std::filesystem::path& path);

}  // namespace fedscore
