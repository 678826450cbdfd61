// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "avsync/cli.hpp"
#include "avsync/config.hpp"
#include "avsync/errors.hpp"
#include "avsync/evalmetrics.hpp"
#include "avsync/nn/layers.hpp"
#include "helpers.hpp"

using namespace avsync;
using avsync::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = AVSYNC_SOURCE_DIR;

int failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int id, const char* title, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("criterion %d %s  %s: %s\n", id, pass ? "PASS" : "FAIL", title, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

std::string map_text(const std::optional<double>& m) { return m ? fmt("%.3f", *m) : "undefined"; }

void log(const std::string& line) {
  std::printf("  .. %s\n", line.c_str());
  std::fflush(stdout);
}

// 1 -------------------------------------------------------------------------
void gradient_integrity() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string detail;
  for (const auto& r : check_training_losses(1)) {
    worst = std::max(worst, r.result.max_relative_error);
    detail += fmt("%s %.1e, ", r.name.c_str(), r.result.max_relative_error);
  }
  const double secs = seconds_since(t0);
  report(1, "gradient integrity", worst < 1e-5 && secs < 60.0, detail + fmt("%.1f s", secs));
}

// 2 -------------------------------------------------------------------------
void ap_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(6)) / 5.0;
      y[i] = rng.coin();
    }
    y[rng.below(n)] = 1;
    if (average_precision(s, y) != avsync::testing::brute_force_ap(s, y)) ++mismatches;
  }
  const double secs = seconds_since(t0);
  report(2, "AP oracle equivalence", mismatches == 0 && secs < 10.0,
         fmt("%d of 200 instances differ, %.2f s", mismatches, secs));
}

// 3 -------------------------------------------------------------------------
void permutation_property() {
  Rng rng(3);
  nn::ParamSet params;
  const auto att = nn::AttentionParams::create(params, "attention", 8, rng);
  const Eigen::Index T = 10;
  nn::Matrix x(T, 8), y(T, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = rng.uniform(-1.0, 1.0);
    y.data()[i] = rng.uniform(-1.0, 1.0);
  }
  std::vector<Eigen::Index> perm(T);
  for (Eigen::Index i = 0; i < T; ++i) perm[i] = i;
  rng.shuffle(perm);
  nn::Matrix xp(T, 8);
  for (Eigen::Index i = 0; i < T; ++i) xp.row(i) = x.row(perm[i]);
  auto run = [&](const nn::Matrix& keys, bool pe) {
    nn::Graph g;
    return nn::Matrix(g.value(nn::attention(g, params, att, g.constant(keys), g.constant(y), pe)));
  };
  const double off = (run(xp, false) - run(x, false)).cwiseAbs().maxCoeff();
  const double on = (run(xp, true) - run(x, true)).cwiseAbs().maxCoeff();
  report(3, "permutation property", off <= 1e-9 && on > 1e-3,
         fmt("PE off max change %.1e, PE on max change %.3f", off, on));
}

// 4-8 -----------------------------------------------------------------------
struct Trained {
  std::unique_ptr<AsdModel> model;
  double seconds = 0.0;
};

Trained train_on(const Corpus& corpus, const TrainConfig& cfg, const std::string& name) {
  const auto t0 = std::chrono::steady_clock::now();
  auto result = train(select_split(corpus, Split::kTrain), select_split(corpus, Split::kVal), cfg);
  const auto& last = result.log.back();
  Trained t{std::move(result.model), seconds_since(t0)};
  log(fmt("%s trained in %.1f s: total loss %.3f -> %.3f, val mAP %.3f", name.c_str(), t.seconds,
          result.log.front().total_loss, last.total_loss, last.val_map));
  return t;
}

bool non_increasing(const std::vector<SweepPoint>& sweep) {
  for (std::size_t k = 1; k < sweep.size(); ++k) {
    if (!sweep[k].map || !sweep[k - 1].map) continue;
    if (*sweep[k].map > *sweep[k - 1].map + 0.02) return false;
  }
  return true;
}

std::string sweep_text(const std::vector<SweepPoint>& sweep) {
  std::string out;
  for (const auto& p : sweep) out += (out.empty() ? "" : " ") + map_text(p.map);
  return out;
}

void experiments() {
  const RunConfig desk = load_run_config(kSource / "configs" / "desk.toml");
  const auto t_gen = std::chrono::steady_clock::now();
  const Corpus corpus = gen_corpus(desk.synth);
  log(fmt("desk corpus: %zu samples in %.1f s; budget %zu frames/batch, %d epochs, lr %g, d %zu, seed %llu",
          corpus.samples.size(), seconds_since(t_gen), desk.train.frames_per_batch, desk.train.epochs,
          desk.train.lr, desk.train.d, static_cast<unsigned long long>(desk.train.seed)));
  const Corpus test = filter_class(select_split(corpus, Split::kTest), "Dubbed", false);
  const Rng eval_rng(desk.train.seed);
  const Corpus mismatch = unsynced_test_set(test, AugmentKind::kMismatch, 0.5, eval_rng);
  const Corpus misalign = unsynced_test_set(test, AugmentKind::kMisalign, 0.5, eval_rng);

  TrainConfig baseline_cfg = desk.train;
  baseline_cfg.contrastive = false;
  baseline_cfg.pe_cross = false;
  baseline_cfg.pe_self = false;
  const Trained baseline = train_on(corpus, baseline_cfg, "baseline (no contrastive, no PE)");
  const Trained full = train_on(corpus, desk.train, "full (contrastive, both PE)");

  // 4
  {
    const Scorer scorer = model_scorer(*baseline.model);
    const auto mm = unsync_sweep(scorer, test, AugmentKind::kMismatch, eval_rng);
    const auto ma = unsync_sweep(scorer, test, AugmentKind::kMisalign, eval_rng);
    const bool monotone = non_increasing(mm) && non_increasing(ma);
    bool drop = true, undefined_end = false;
    for (const auto* sweep : {&mm, &ma}) {
      const auto& first = sweep->front().map;
      const auto& last = sweep->back().map;
      undefined_end = undefined_end || !last;
      drop = drop && first && last && *first - *last >= 0.20;
    }
    report(4, "unsync sweep trend",
           monotone && drop,
           "mismatch [" + sweep_text(mm) + "], misalign [" + sweep_text(ma) + "]" +
               (monotone ? "; non-increasing" : "; not monotone") +
               (undefined_end ? "; p=1.0 mAP undefined (every positive frame is relabeled 0), drop not measurable"
                              : (drop ? "" : "; p=0 to p=1.0 drop below 0.20")) +
               fmt("; baseline trained in %.0f s", baseline.seconds));
  }

  // 5
  {
    const double full_mm = map_eval(*full.model, mismatch), full_ma = map_eval(*full.model, misalign);
    const double full_clean = map_eval(*full.model, test), base_clean = map_eval(*baseline.model, test);
    const double base_mm = map_eval(*baseline.model, mismatch);
    report(5, "full vs baseline",
           full_mm >= 0.85 && full_ma >= 0.85 && std::abs(full_clean - base_clean) <= 0.05 && base_mm <= 0.70,
           fmt("full mismatch %.3f, misalign %.3f, clean %.3f; baseline clean %.3f, mismatch %.3f", full_mm,
               full_ma, full_clean, base_clean, base_mm));
  }

  // 6
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = ablation_grid(corpus, desk.train, [](const AblationRow& r) {
      log(fmt("ablation %-24s mismatch %.3f misalign %.3f", r.name.c_str(), r.mismatch_map, r.misalign_map));
    });
    const auto& full_row = rows[0];
    bool lowest_misalign = true, full_highest_mismatch = true, pe_rows_below = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i != 1 && rows[i].misalign_map <= rows[1].misalign_map) lowest_misalign = false;
      if (i != 0 && rows[i].mismatch_map >= full_row.mismatch_map) full_highest_mismatch = false;
      if (i >= 2 && rows[i].misalign_map >= full_row.misalign_map) pe_rows_below = false;
    }
    std::string detail;
    for (const auto& r : rows) detail += fmt("%s %.3f/%.3f; ", r.name.c_str(), r.mismatch_map, r.misalign_map);
    detail += std::string("w/o contrastive lowest misalign ") + (lowest_misalign ? "yes" : "no") +
              ", full highest mismatch " + (full_highest_mismatch ? "yes" : "no") + ", PE rows below full " +
              (pe_rows_below ? "yes" : "no") + fmt(", %.0f s", seconds_since(t0));
    report(6, "ablation ordering", lowest_misalign && full_highest_mismatch && pe_rows_below, detail);
  }
  // 7
  {
    const double clean = map_eval(*baseline.model, test);
    const double silent = map_eval(*baseline.model, silence_audio(test));
    const double masked = map_eval(*baseline.model, mask_bottom(test, desk.eval.mask_fraction));
    report(7, "silence and mask probes", clean - silent >= 0.20 && clean - masked >= 0.20,
           fmt("clean %.3f, silence %.3f, mask %.3f", clean, silent, masked));
  }

  // 8
  {
    const RunConfig dubbed_cfg = load_run_config(kSource / "configs" / "dubbed.json");
    const Corpus dubbed = select_split(gen_corpus(dubbed_cfg.synth), Split::kTest);
    const auto ranking = rank_dubbed(model_scorer(*full.model), dubbed, desk.eval.threshold);
    double worst_dubbed = 0.0;
    for (const auto& v : ranking.dubbed_videos) worst_dubbed = std::max(worst_dubbed, ranking.tpr.at(v));
    report(8, "dubbed ranking", ranking.dubbed_videos.size() == 20 && ranking.violations <= 2,
           fmt("%zu dubbed videos, %zu at or above the non-dubbed median TPR %.3f (highest dubbed TPR %.3f)",
               ranking.dubbed_videos.size(), ranking.violations, ranking.median_other, worst_dubbed));
  }
}

// 9 -------------------------------------------------------------------------
int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) log("command failed: " + err.str());
  return code;
}

std::string log_without_wall_clock(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line, kept;
  while (std::getline(in, line)) kept += line.substr(0, line.rfind(',')) + '\n';
  return kept;
}

void reproducibility() {
  const auto t0 = std::chrono::steady_clock::now();
  TempDir dir("repro");
  {
    std::ofstream cfg(dir / "tiny.json");
    cfg << R"({"synth": {"seed": 5, "Hv": 8, "Wv": 8, "Ha": 5, "T_min": 24, "T_max": 32,
      "counts": {"train": {"SyncSpeaking": 8, "Silent": 2, "VisualOnly": 2, "AudioOnly": 2},
                 "val": {"SyncSpeaking": 2, "Silent": 1},
                 "test": {"SyncSpeaking": 6, "Silent": 2, "Dubbed": 2}}},
      "train": {"epochs": 2, "d": 8, "frames_per_batch": 200, "checkpoint_every": 1}})";
  }
  const std::string cfg = (dir / "tiny.json").string();
  const auto path = [&](const std::string& name) { return (dir / name).string(); };
  std::vector<std::string> differing, differing_jobs;
  bool ran = true;
  // Runs a and b are identical invocations; run c adds --jobs 2, which only
  // run.json records.
  auto rerun = [&](const std::string& name, std::vector<std::string> args) {
    for (const char* run : {"a", "b", "c"}) {
      auto full = args;
      full.insert(full.end(), {"--out", path(name + "_" + run)});
      if (std::string(run) == "c") full.insert(full.end(), {"--jobs", "2"});
      ran = cli(full) == 0 && ran;
    }
    if (!avsync::testing::same_tree(path(name + "_a"), path(name + "_b"), {"train_log.csv"})) {
      differing.push_back(name);
    }
    if (!avsync::testing::same_tree(path(name + "_a"), path(name + "_c"), {"train_log.csv", "run.json"})) {
      differing_jobs.push_back(name);
    }
  };
  rerun("gen", {"gen", "--config", cfg});
  const std::string data = path("gen_a");
  rerun("augment", {"augment", "--in", data, "--kind", "misalign", "--proportion", "0.5", "--seed", "7"});
  rerun("train", {"train", "--config", cfg, "--in", data});
  for (const char* run : {"train_b", "train_c"}) {
    if (log_without_wall_clock(dir / "train_a" / "train_log.csv") != log_without_wall_clock(dir / run / "train_log.csv")) {
      differing.push_back(std::string(run) + "/train_log.csv");
    }
  }
  const std::string model = path("train_a") + "/model";
  rerun("eval", {"eval", "--in", data, "--model", model, "--kind", "mismatch", "--seed", "7"});
  rerun("eval_unsync", {"eval", "--in", data, "--model", model, "--unsync", path("augment_a"), "--proportion",
                        "0.5", "--seed", "7"});
  rerun("sweep", {"sweep", "--config", cfg, "--in", data, "--model", model});
  rerun("ablate", {"ablate", "--config", cfg, "--in", data});
  rerun("gradcheck", {"gradcheck", "--seed", "3"});
  rerun("rank", {"rank-dubbed", "--in", data, "--model", model});

  // Library route: same corpus and weights as the command line.
  const RunConfig rc = load_run_config(dir / "tiny.json");
  const bool library_corpus = gen_corpus(rc.synth, 2) == load_corpus(data);
  const Corpus corpus = load_corpus(data);
  const auto trained = train(select_split(corpus, Split::kTrain), select_split(corpus, Split::kVal), rc.train);
  save_model(*trained.model, dir / "library_model");
  const bool library_model = avsync::testing::same_tree(dir / "library_model", model);

  std::string detail = "gen, augment, train (+checkpoints), eval, eval --unsync, sweep, ablate, gradcheck, "
                       "rank-dubbed each rerun identically and with --jobs 2";
  if (!differing.empty()) {
    detail += "; differing on rerun:";
    for (const auto& d : differing) detail += " " + d;
  }
  if (!differing_jobs.empty()) {
    detail += "; differing across job counts:";
    for (const auto& d : differing_jobs) detail += " " + d;
  }
  detail += std::string("; library corpus ") + (library_corpus ? "identical" : "differs") + ", library model " +
            (library_model ? "identical" : "differs") + fmt(", %.1f s", seconds_since(t0));
  report(9, "reproducibility", ran && differing.empty() && differing_jobs.empty() && library_corpus && library_model,
         detail);
}

// 10 ------------------------------------------------------------------------
std::vector<std::vector<float>> sorted_rows(const Sample& s, const SpeakingSegment& seg) {
  std::vector<std::vector<float>> rows;
  const auto w = s.audio.coeffs;
  for (std::size_t r = 4 * seg.start; r < 4 * seg.end; ++r) {
    rows.emplace_back(s.audio.values.begin() + static_cast<std::ptrdiff_t>(r * w),
                      s.audio.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

void augmentation_soundness() {
  SynthConfig cfg = SynthConfig::desk_default();
  cfg.seed = 10;
  const Corpus corpus = gen_corpus(cfg);
  std::size_t visual_changed = 0, labels_left = 0, multiset_broken = 0, short_shift = 0, identity_broken = 0;
  std::size_t segments = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const Corpus mm = mismatch_set(corpus, rng);
    const Corpus ma = misalign_set(corpus, ShiftSpec{}, rng);
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
      const Sample& s = corpus.samples[i];
      for (const Corpus* aug : {&mm, &ma}) {
        if (!(aug->samples[i].face == s.face)) ++visual_changed;
        for (const auto& seg : extract_speaking_segments(s.labels)) {
          for (std::size_t t = seg.start; t < seg.end; ++t) labels_left += aug->samples[i].labels[t];
        }
      }
      for (const auto& seg : extract_speaking_segments(s.labels)) {
        ++segments;
        if (sorted_rows(ma.samples[i], seg) != sorted_rows(s, seg)) ++multiset_broken;
        const auto w = s.audio.coeffs;
        const std::size_t L = 4 * seg.length();
        const auto first = s.audio.values.begin() + static_cast<std::ptrdiff_t>(4 * seg.start * w);
        const std::vector<float> before(first, first + static_cast<std::ptrdiff_t>(L * w));
        const auto after_first = ma.samples[i].audio.values.begin() + static_cast<std::ptrdiff_t>(4 * seg.start * w);
        const std::vector<float> after(after_first, after_first + static_cast<std::ptrdiff_t>(L * w));
        // No circular shift of 12 rows or fewer, either way, explains the output.
        for (std::int64_t k = 1; k < 13; ++k) {
          if (misalign_segment(before, w, k) == after || misalign_segment(before, w, -k) == after) {
            ++short_shift;
            break;
          }
        }
        if (misalign_segment(before, w, static_cast<std::int64_t>(L)) != before ||
            misalign_segment(before, w, -static_cast<std::int64_t>(L)) != before) {
          ++identity_broken;
        }
      }
    }
  }
  report(10, "augmentation soundness",
         visual_changed == 0 && labels_left == 0 && multiset_broken == 0 && short_shift == 0 && identity_broken == 0,
         fmt("%zu segments x 3 seeds: visual changes %zu, positive labels left %zu, audio multisets broken %zu, "
             "shifts under 13 rows %zu, shift-by-L not identity %zu",
             segments / 3, visual_changed, labels_left, multiset_broken, short_shift, identity_broken));
}

}  // namespace

// Criterion numbers on the command line restrict the run; 4 to 8 share one
// set of trained models and run together.
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const auto wanted = [&](int lo, int hi) {
    return only.empty() || only.lower_bound(lo) != only.upper_bound(hi);
  };
  try {
    if (wanted(1, 1)) gradient_integrity();
    if (wanted(2, 2)) ap_oracle();
    if (wanted(3, 3)) permutation_property();
    if (wanted(4, 8)) experiments();
    if (wanted(9, 9)) reproducibility();
    if (wanted(10, 10)) augmentation_soundness();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
