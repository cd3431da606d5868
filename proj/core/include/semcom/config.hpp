#pragma once

#include <filesystem>
#include <string>

#include "semcom/data.hpp"
#include "semcom/model.hpp"
#include "semcom/training.hpp"

namespace semcom {

/// Dataset and synthetic-corpus settings.
struct DataConfig {
  real blob_sigma = 4.0;
  std::size_t synth_frames = 64;
  std::size_t synth_count_min = 1;
  std::size_t synth_count_max = 8;
  real synth_noise = 0.05;
  /// 0 selects the default split rule.
  std::size_t test_frames = 0;
};

/// Everything a run needs, as resolved from a key = value config file.
struct Settings {
  TrainConfig train;
  ModelConfig model;
  DataConfig data;
};

/// Model config with the run-level p, dropout and seed applied.
ModelConfig resolved_model_config(const Settings& settings);
SyntheticConfig synthetic_config(const Settings& settings);
SplitSpec split_spec(const Settings& settings);

/// Parses `key = value` lines ('#' starts a comment). Unspecified keys keep
/// their defaults. In strict mode unknown keys are errors. Errors name the key.
Settings parse_config_text(const std::string& text, bool strict = true);
Settings parse_config(const std::filesystem::path& path, bool strict = true);

/// Canonical text form listing every key; parse_config_text round-trips it exactly.
std::string to_config_text(const Settings& settings);

}  // namespace semcom
