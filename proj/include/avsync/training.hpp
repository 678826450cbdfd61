#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "avsync/model.hpp"
#include "avsync/nn/graph.hpp"
#include "avsync/rng.hpp"
#include "avsync/trackdata.hpp"

namespace avsync {

struct TrainConfig {
  double beta = 1.0;                  // weight of the contrastive term
  std::size_t frames_per_batch = 2500;
  int epochs = 30;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  bool contrastive = true;
  bool pe_cross = true;
  bool pe_self = true;
  HeadKind head = HeadKind::kSync;
  std::size_t d = 32;
  std::size_t window = 11;
  int checkpoint_every = 0;  // 0 keeps only the final checkpoint
  int jobs = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

ModelConfig model_config(const TrainConfig& cfg, const Corpus& corpus);

// Shuffles 0..n-1 with rng, then packs greedily: a batch closes when the next
// track would push it past the frame budget.
std::vector<std::vector<std::size_t>> pack_batches(std::span<const std::size_t> lengths,
                                                   std::span<const std::size_t> order,
                                                   std::size_t frames_per_batch);
std::vector<std::vector<std::size_t>> assemble_batches(std::span<const std::size_t> lengths,
                                                       std::size_t frames_per_batch, Rng& rng);

// Uniform fixed-point-free permutation of 0..n-1 by rejection; nullopt for n < 2.
std::optional<std::vector<std::size_t>> sample_derangement(std::size_t n, Rng& rng);

struct BatchItem {
  const ModelInput* input = nullptr;
  std::vector<double> targets;
};

// Batch positions whose targets hold at least one positive frame.
std::vector<std::size_t> positive_set(std::span<const BatchItem> batch);

struct BatchLoss {
  double supervised = 0.0;
  double contrastive = 0.0;  // mean BCE of the exchanged pairs, before beta
  double total = 0.0;
  std::size_t pairs = 0;
  nn::Gradients grads;
};

// supervised mean + beta * contrastive mean. `partner` maps the k-th member of
// positive_set(batch) to the member whose audio embedding it receives; pass
// nullptr to skip the contrastive term. Each pair is truncated to the shorter
// track. Frontends run once per sample; the backend sees leaf copies of the
// embeddings and their gradients are pushed back through each frontend.
BatchLoss batch_loss(const AsdModel& model, std::span<const BatchItem> batch,
                     const std::vector<std::size_t>* partner, double beta, int jobs = 1);

struct EpochLog {
  int epoch = 0;
  double sup_loss = 0.0;
  double contr_loss = 0.0;
  double total_loss = 0.0;
  double val_map = 0.0;  // NaN without a usable validation set
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::unique_ptr<AsdModel> model;
  std::vector<EpochLog> log;
  double first_batch_sup_loss = 0.0;  // before any update; NaN with 0 epochs
};

struct TrainHooks {
  std::optional<std::filesystem::path> out_dir;  // checkpoints go under it
  std::function<void(const EpochLog&)> on_epoch;
};

// Trains on `train_set`; `val_set` feeds the per-epoch val_map column.
TrainResult train(const Corpus& train_set, const Corpus& val_set, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

void write_train_log(const std::filesystem::path& path, std::span<const EpochLog> log);

void save_model(const AsdModel& model, const std::filesystem::path& directory);
std::unique_ptr<AsdModel> load_model(const std::filesystem::path& directory);

}  // namespace avsync

#include "avsync/nn/gradcheck.hpp"

namespace avsync {

struct HeadGradCheck {
  std::string name;
  nn::GradCheckResult result;
};

// grad_check of the full training loss (supervised + contrastive) for every
// head on a tiny synthetic batch: T in [12, 13], 4x4 faces, 3 coefficients,
// d = 4.
std::vector<HeadGradCheck> check_training_losses(std::uint64_t seed);

}  // namespace avsync
