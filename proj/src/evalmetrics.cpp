#include "avsync/evalmetrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "avsync/errors.hpp"
#include "avsync/parallel.hpp"

namespace avsync {

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
  if (scores.empty()) throw UndefinedMetricError("average precision of an empty ranking");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 0) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) throw UndefinedMetricError("average precision needs at least one positive frame");
  return sum / static_cast<double>(hits);
}

Scorer model_scorer(const AsdModel& model) {
  return [&model](const Sample& s) { return model.predict(s); };
}

PooledFrames pool_frames(const Scorer& scorer, const Corpus& corpus, int jobs) {
  const auto& samples = corpus.samples;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& fa = samples[a].face;
    const auto& fb = samples[b].face;
    return std::tie(fa.video_id, fa.track_id) < std::tie(fb.video_id, fb.track_id);
  });
  std::vector<std::vector<double>> scores(samples.size());
  parallel_for(order.size(), jobs, [&](std::size_t k) {
    const Sample& s = samples[order[k]];
    scores[k] = scorer(s);
    if (scores[k].size() != s.frames()) {
      throw DimensionError("scorer returned " + std::to_string(scores[k].size()) + " scores for " +
                           std::to_string(s.frames()) + " frames of '" + s.id() + "'");
    }
  });
  PooledFrames pool;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Sample& s = samples[order[k]];
    pool.scores.insert(pool.scores.end(), scores[k].begin(), scores[k].end());
    pool.labels.insert(pool.labels.end(), s.labels.begin(), s.labels.end());
  }
  return pool;
}

double map_eval(const Scorer& scorer, const Corpus& corpus, int jobs) {
  const auto pool = pool_frames(scorer, corpus, jobs);
  return average_precision(pool.scores, pool.labels);
}

double map_eval(const AsdModel& model, const Corpus& corpus, int jobs) {
  return map_eval(model_scorer(model), corpus, jobs);
}

std::map<std::string, double> tpr_per_video(const Scorer& scorer, const Corpus& corpus,
                                            double threshold, int jobs) {
  std::vector<std::vector<double>> scores(corpus.samples.size());
  parallel_for(corpus.samples.size(), jobs, [&](std::size_t i) { scores[i] = scorer(corpus.samples[i]); });
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // hits, positives
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const Sample& s = corpus.samples[i];
    auto& [hits, positives] = counts[s.face.video_id];
    for (std::size_t t = 0; t < s.labels.size(); ++t) {
      if (s.labels[t] == 0) continue;
      ++positives;
      if (scores[i][t] > threshold) ++hits;
    }
  }
  std::map<std::string, double> tpr;
  for (const auto& [video, c] : counts) {
    if (c.second > 0) tpr[video] = static_cast<double>(c.first) / static_cast<double>(c.second);
  }
  return tpr;
}

namespace {

Corpus augmented(const Corpus& original, AugmentKind kind, const Rng& rng, const ShiftSpec& shift) {
  Rng local = rng.fork(1);
  return kind == AugmentKind::kMismatch ? mismatch_set(original, local)
                                        : misalign_set(original, shift, local);
}

}  // namespace

Corpus unsynced_test_set(const Corpus& original, AugmentKind kind, double proportion, const Rng& rng,
                         const ShiftSpec& shift) {
  return curate(original, augmented(original, kind, rng, shift), proportion, rng.fork(2));
}

std::vector<SweepPoint> unsync_sweep(const Scorer& scorer, const Corpus& original, AugmentKind kind,
                                     const Rng& rng, std::span<const double> proportions, int jobs,
                                     const ShiftSpec& shift) {
  for (std::size_t i = 1; i < proportions.size(); ++i) {
    if (!(proportions[i] > proportions[i - 1])) throw ConfigError("sweep proportions must increase");
  }
  const Corpus unsync = augmented(original, kind, rng, shift);
  const Rng selection = rng.fork(2);
  std::vector<SweepPoint> sweep;
  for (double p : proportions) {
    const Corpus curated = curate(original, unsync, p, selection);
    SweepPoint point{p, std::nullopt};
    const auto pool = pool_frames(scorer, curated, jobs);
    if (std::find(pool.labels.begin(), pool.labels.end(), 1) != pool.labels.end()) {
      point.map = average_precision(pool.scores, pool.labels);
    }
    sweep.push_back(point);
  }
  return sweep;
}

std::vector<AblationRow> ablation_rows() {
  return {{"full", true, true, true},
          {"w/o contrastive", false, true, true},
          {"w/o both PE", true, false, false},
          {"w/o cross-attention PE", true, false, true},
          {"w/o self-attention PE", true, true, false}};
}

std::vector<AblationRow> ablation_grid(const Corpus& corpus, const TrainConfig& base_cfg,
                                       const std::function<void(const AblationRow&)>& on_row) {
  const Corpus train_set = select_split(corpus, Split::kTrain);
  const Corpus val_set = select_split(corpus, Split::kVal);
  const Corpus test_set = filter_class(select_split(corpus, Split::kTest), "Dubbed", false);
  const Rng rng(base_cfg.seed);
  const Corpus mismatch = unsynced_test_set(test_set, AugmentKind::kMismatch, 0.5, rng);
  const Corpus misalign = unsynced_test_set(test_set, AugmentKind::kMisalign, 0.5, rng);
  auto rows = ablation_rows();
  for (auto& row : rows) {
    TrainConfig cfg = base_cfg;
    cfg.contrastive = row.contrastive;
    cfg.pe_cross = row.pe_cross;
    cfg.pe_self = row.pe_self;
    const auto trained = train(train_set, val_set, cfg);
    row.mismatch_map = map_eval(*trained.model, mismatch, cfg.jobs);
    row.misalign_map = map_eval(*trained.model, misalign, cfg.jobs);
    if (on_row) on_row(row);
  }
  return rows;
}

DubbedRanking rank_dubbed(const Scorer& scorer, const Corpus& corpus, double threshold, int jobs) {
  DubbedRanking r;
  r.tpr = tpr_per_video(scorer, corpus, threshold, jobs);
  std::vector<std::string> dubbed;
  for (const auto& s : corpus.samples) {
    if (s.class_tag.starts_with("Dubbed") && r.tpr.count(s.face.video_id)) dubbed.push_back(s.face.video_id);
  }
  std::sort(dubbed.begin(), dubbed.end());
  dubbed.erase(std::unique(dubbed.begin(), dubbed.end()), dubbed.end());
  std::vector<double> others;
  for (const auto& [video, tpr] : r.tpr) {
    if (!std::binary_search(dubbed.begin(), dubbed.end(), video)) others.push_back(tpr);
  }
  if (others.empty()) throw UndefinedMetricError("no non-dubbed video with a positive frame");
  std::sort(others.begin(), others.end());
  const std::size_t m = others.size();
  r.median_other = m % 2 == 1 ? others[m / 2] : 0.5 * (others[m / 2 - 1] + others[m / 2]);
  for (const auto& v : dubbed) {
    if (r.tpr.at(v) >= r.median_other) ++r.violations;
  }
  r.dubbed_videos = std::move(dubbed);
  return r;
}

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_report(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string flag_string(const AblationRow& row) {
  std::string flags;
  flags += row.contrastive ? "contrastive" : "no-contrastive";
  flags += row.pe_cross ? "+pe_cross" : "+no-pe_cross";
  flags += row.pe_self ? "+pe_self" : "+no-pe_self";
  return flags;
}

}  // namespace

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> sweep) {
  auto out = open_report(path);
  out << "proportion,map\n";
  for (const auto& p : sweep) {
    out << format_real(p.proportion) << ',' << (p.map ? format_real(*p.map) : "nan") << '\n';
  }
}

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows) {
  auto out = open_report(path);
  out << "flags,mismatch_map,misalign_map\n";
  for (const auto& r : rows) {
    out << flag_string(r) << ',' << format_real(r.mismatch_map) << ',' << format_real(r.misalign_map) << '\n';
  }
}

void write_tpr_csv(const std::filesystem::path& path, const std::map<std::string, double>& tpr) {
  auto out = open_report(path);
  out << "video_id,tpr\n";
  for (const auto& [video, value] : tpr) out << video << ',' << format_real(value) << '\n';
}

nlohmann::json sweep_json(std::span<const SweepPoint> sweep) {
  auto arr = nlohmann::json::array();
  for (const auto& p : sweep) {
    arr.push_back({{"proportion", p.proportion}, {"map", p.map ? nlohmann::json(*p.map) : nlohmann::json()}});
  }
  return arr;
}

nlohmann::json ablation_json(std::span<const AblationRow> rows) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"name", r.name},
                   {"flags", flag_string(r)},
                   {"mismatch_map", r.mismatch_map},
                   {"misalign_map", r.misalign_map}});
  }
  return arr;
}

}  // namespace avsync
