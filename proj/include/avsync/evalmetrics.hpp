#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "avsync/desync.hpp"
#include "avsync/model.hpp"
#include "avsync/training.hpp"

namespace avsync {

// Ranks by score descending; equal scores keep input order, so callers pass
// frames already sorted by (video_id, track_id, frame). Throws
// UndefinedMetricError without positives.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Per-frame speaking scores for one sample.
using Scorer = std::function<std::vector<double>(const Sample&)>;

Scorer model_scorer(const AsdModel& model);

struct PooledFrames {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

// Scores every frame and orders the pool by (video_id, track_id, frame).
PooledFrames pool_frames(const Scorer& scorer, const Corpus& corpus, int jobs = 1);

double map_eval(const Scorer& scorer, const Corpus& corpus, int jobs = 1);
double map_eval(const AsdModel& model, const Corpus& corpus, int jobs = 1);

// Videos without a positive frame are left out.
std::map<std::string, double> tpr_per_video(const Scorer& scorer, const Corpus& corpus,
                                            double threshold = 0.5, int jobs = 1);

inline const std::vector<double> kSweepProportions = {0.0, 0.25, 0.5, 0.75, 1.0};

struct SweepPoint {
  double proportion = 0.0;
  std::optional<double> map;  // empty when the curated set has no positive frame
};

// The augmented set is drawn from rng.fork(1) and the curation from
// rng.fork(2), so augmented ids nest as the proportion grows.
Corpus unsynced_test_set(const Corpus& original, AugmentKind kind, double proportion, const Rng& rng,
                         const ShiftSpec& shift = {});

std::vector<SweepPoint> unsync_sweep(const Scorer& scorer, const Corpus& original, AugmentKind kind,
                                     const Rng& rng,
                                     std::span<const double> proportions = kSweepProportions,
                                     int jobs = 1, const ShiftSpec& shift = {});

struct AblationRow {
  std::string name;
  bool contrastive = true;
  bool pe_cross = true;
  bool pe_self = true;
  double mismatch_map = 0.0;
  double misalign_map = 0.0;
};

// full, w/o contrastive, w/o both PE, w/o cross PE, w/o self PE.
std::vector<AblationRow> ablation_rows();

// Trains every row with base_cfg's seed and scores each on p=0.5 mismatch and
// misalign test sets derived with Rng(base_cfg.seed).
std::vector<AblationRow> ablation_grid(const Corpus& corpus, const TrainConfig& base_cfg,
                                       const std::function<void(const AblationRow&)>& on_row = {});

struct DubbedRanking {
  std::map<std::string, double> tpr;
  std::vector<std::string> dubbed_videos;
  double median_other = 0.0;
  std::size_t violations = 0;  // dubbed videos at or above the non-dubbed median
};

DubbedRanking rank_dubbed(const Scorer& scorer, const Corpus& corpus, double threshold = 0.5,
                          int jobs = 1);

// Flat reports for plotting.
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> sweep);
void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows);
void write_tpr_csv(const std::filesystem::path& path, const std::map<std::string, double>& tpr);
nlohmann::json sweep_json(std::span<const SweepPoint> sweep);
nlohmann::json ablation_json(std::span<const AblationRow> rows);

// Shortest decimal form that round-trips the double.
std::string format_real(double value);

}  // namespace avsync
