#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "avsync/errors.hpp"
#include "avsync/evalmetrics.hpp"
#include "avsync/synthgen.hpp"
#include "helpers.hpp"

using namespace avsync;
using avsync::testing::brute_force_ap;
using avsync::testing::make_sample;
using avsync::testing::TempDir;

namespace {

Corpus sweep_corpus(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.Hv = cfg.Wv = 8;
  cfg.Ha = 5;
  cfg.counts[Split::kTest] = {{SampleClass::kSyncSpeaking, 8}, {SampleClass::kSilent, 4}};
  return gen_corpus(cfg);
}

std::vector<double> as_scores(const LabelSeq& y) { return {y.begin(), y.end()}; }

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("evalmetrics") {
  TEST_CASE("average precision examples") {
    const std::vector<double> s = {0.9, 0.8, 0.7};
    const std::vector<std::uint8_t> y = {1, 0, 1};
    CHECK(average_precision(s, y) == doctest::Approx(5.0 / 6.0));
    const std::vector<std::uint8_t> perfect = {1, 1, 0};
    CHECK(average_precision(s, perfect) == 1.0);
    const std::vector<std::uint8_t> none = {0, 0, 0};
    CHECK_THROWS_AS(average_precision(s, none), UndefinedMetricError);
    CHECK_THROWS_AS(average_precision(std::vector<double>{}, std::vector<std::uint8_t>{}), UndefinedMetricError);
    const std::vector<std::uint8_t> two = {1, 0};
    CHECK_THROWS_AS(average_precision(s, two), DimensionError);
  }

  TEST_CASE("average precision agrees with a brute-force ranking") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng.below(12);
      std::vector<double> s(n);
      std::vector<std::uint8_t> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng.below(5)) / 4.0;  // ties are common
        y[i] = rng.coin();
      }
      y[rng.below(n)] = 1;
      const double ap = average_precision(s, y);
      CHECK(ap == brute_force_ap(s, y));
      CHECK(ap > 0.0);
      CHECK(ap <= 1.0);
      std::vector<double> t(n);
      for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
      CHECK(average_precision(t, y) == ap);
    }
  }

  TEST_CASE("pooling orders frames by video and track") {
    Corpus c{1, {make_sample("b", 2, {0, 1}), make_sample("a", 3, {1, 0, 0})}};
    const Scorer scorer = [](const Sample& s) {
      return std::vector<double>(s.frames(), s.face.video_id == "a" ? 0.1 : 0.2);
    };
    const auto pool = pool_frames(scorer, c);
    CHECK(pool.labels == std::vector<std::uint8_t>{1, 0, 0, 0, 1});
    CHECK(pool.scores == std::vector<double>{0.1, 0.1, 0.1, 0.2, 0.2});
    const Scorer wrong = [](const Sample&) { return std::vector<double>{0.5}; };
    CHECK_THROWS_AS(pool_frames(wrong, c), DimensionError);
  }

  TEST_CASE("per-video true positive rate") {
    Corpus c{1, {make_sample("a", 4, {1, 1, 0, 1}), make_sample("b", 2, {0, 0}), make_sample("c", 2, {1, 1})}};
    const Scorer scorer = [](const Sample& s) {
      if (s.face.video_id == "a") return std::vector<double>{0.9, 0.4, 0.9, 0.6};
      return std::vector<double>(s.frames(), 0.5);
    };
    const auto tpr = tpr_per_video(scorer, c);
    CHECK(tpr.size() == 2);
    CHECK(tpr.at("a") == doctest::Approx(2.0 / 3.0));
    CHECK(tpr.at("c") == 0.0);  // 0.5 is not above the threshold
    CHECK(tpr_per_video(scorer, c, 0.45).at("c") == 1.0);
  }

  TEST_CASE("unsync sweep: nesting, oracle and baselines") {
    const Corpus c = sweep_corpus(4);
    const Rng rng(8);
    for (auto kind : {AugmentKind::kMismatch, AugmentKind::kMisalign}) {
      std::set<std::size_t> previous;
      for (double p : kSweepProportions) {
        const Corpus curated = unsynced_test_set(c, kind, p, rng);
        std::set<std::size_t> changed;
        for (std::size_t i = 0; i < c.samples.size(); ++i) {
          if (!(curated.samples[i] == c.samples[i])) changed.insert(i);
        }
        CHECK(std::includes(changed.begin(), changed.end(), previous.begin(), previous.end()));
        previous = changed;
      }

      const Scorer oracle = [](const Sample& s) { return as_scores(s.labels); };
      const Scorer anti = [](const Sample& s) {
        std::vector<double> v;
        for (auto y : s.labels) v.push_back(1.0 - y);
        return v;
      };
      const Scorer constant = [](const Sample& s) { return std::vector<double>(s.frames(), 0.3); };
      const auto sweep = unsync_sweep(oracle, c, kind, rng);
      REQUIRE(sweep.size() == 5);
      for (const auto& pt : sweep) {
        if (pt.map) CHECK(*pt.map == 1.0);
      }
      CHECK(sweep.front().map.has_value());
      CHECK_FALSE(sweep.back().map.has_value());  // every positive was desynchronized
      for (const Scorer* scorer : {&anti, &constant}) {
        const auto points = unsync_sweep(*scorer, c, kind, rng);
        for (std::size_t k = 0; k < points.size(); ++k) {
          if (!points[k].map) continue;
          const auto pool = pool_frames(*scorer, unsynced_test_set(c, kind, points[k].proportion, rng));
          CHECK(*points[k].map == doctest::Approx(brute_force_ap(pool.scores, pool.labels)).epsilon(1e-12));
        }
      }
    }
    const std::vector<double> bad = {0.5, 0.25};
    CHECK_THROWS_AS(unsync_sweep([](const Sample& s) { return as_scores(s.labels); }, c, AugmentKind::kMismatch,
                                 rng, bad),
                    ConfigError);
  }

  TEST_CASE("dubbed ranking") {
    Corpus c;
    const std::vector<std::pair<std::string, double>> videos = {
        {"s1", 0.9}, {"s2", 0.8}, {"s3", 0.7}, {"s4", 0.6}, {"d1", 0.1}, {"d2", 0.75}};
    for (const auto& [name, _] : videos) {
      Sample s = make_sample(name, 10, LabelSeq(10, 1));
      s.class_tag = name[0] == 'd' ? "Dubbed" : "SyncSpeaking";
      c.samples.push_back(s);
    }
    const Scorer scorer = [&](const Sample& s) {
      std::vector<double> v(10, 0.0);
      double rate = 0.0;
      for (const auto& [name, r] : videos) {
        if (name == s.face.video_id) rate = r;
      }
      for (int t = 0; t < static_cast<int>(std::lround(rate * 10)); ++t) v[t] = 1.0;
      return v;
    };
    const auto r = rank_dubbed(scorer, c);
    CHECK(r.dubbed_videos == std::vector<std::string>{"d1", "d2"});
    CHECK(r.median_other == doctest::Approx(0.75));
    CHECK(r.violations == 1);
  }

  TEST_CASE("report formats") {
    CHECK(format_real(0.5) == "0.5");
    CHECK(format_real(1.0) == "1");
    CHECK(std::stod(format_real(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_real(std::nan("")) == "nan");
    TempDir dir("reports");
    const std::vector<SweepPoint> sweep = {{0.0, 0.9}, {1.0, std::nullopt}};
    write_sweep_csv(dir / "s.csv", sweep);
    CHECK(read_text(dir / "s.csv") == "proportion,map\n0,0.9\n1,nan\n");
    CHECK(sweep_json(sweep)[1]["map"].is_null());
    auto rows = ablation_rows();
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].name == "full");
    CHECK_FALSE(rows[1].contrastive);
    CHECK((!rows[2].pe_cross && !rows[2].pe_self));
    CHECK((!rows[3].pe_cross && rows[3].pe_self));
    CHECK((rows[4].pe_cross && !rows[4].pe_self));
    rows[0].mismatch_map = 0.25;
    rows[0].misalign_map = 0.5;
    write_ablation_csv(dir / "a.csv", std::span(rows).first(1));
    CHECK(read_text(dir / "a.csv") == "flags,mismatch_map,misalign_map\ncontrastive+pe_cross+pe_self,0.25,0.5\n");
    write_tpr_csv(dir / "t.csv", {{"v1", 0.5}});
    CHECK(read_text(dir / "t.csv") == "video_id,tpr\nv1,0.5\n");
  }
}
