#pragma once

#include <filesystem>

#include <json.hpp>

#include "avsync/nn/graph.hpp"

namespace avsync::nn {

// Checkpoint directory: index.json {version, meta, params: {name: file}} plus
// one AVT1 tensor file per parameter. Values are stored as f32.
void save_checkpoint(const ParamSet& params, const nlohmann::json& meta,
                     const std::filesystem::path& directory);

struct Checkpoint {
  nlohmann::json meta;
  ParamSet params;
};

Checkpoint load_checkpoint(const std::filesystem::path& directory);

// Copies values from `source` into `target` by name; every target parameter
// must be present with the same shape.
void assign_params(ParamSet& target, const ParamSet& source);

}  // namespace avsync::nn
