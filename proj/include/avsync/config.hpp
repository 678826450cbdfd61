#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "avsync/desync.hpp"
#include "avsync/synthgen.hpp"
#include "avsync/training.hpp"

namespace avsync {

struct EvalOptions {
  std::vector<double> proportions = {0.0, 0.25, 0.5, 0.75, 1.0};
  double threshold = 0.5;
  double proportion = 0.5;
  int min_shift_ms = 130;
  double mask_fraction = 0.3;
};

// Config file sections [synth], [train], [eval]. Unknown keys are rejected.
struct RunConfig {
  SynthConfig synth = SynthConfig::desk_default();
  TrainConfig train;
  EvalOptions eval;
  bool seed_given = false;  // the file set synth.seed or train.seed

  nlohmann::json to_json() const;
};

// TOML or JSON, picked by extension (.toml / .json); throws ConfigError.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const nlohmann::json& document);
nlohmann::json parse_toml(std::string_view text);

}  // namespace avsync
