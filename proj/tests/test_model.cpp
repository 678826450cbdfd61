#include <doctest.h>

#include <cmath>

#include "avsync/errors.hpp"
#include "avsync/model.hpp"
#include "avsync/nn/ops.hpp"
#include "avsync/synthgen.hpp"
#include "avsync/training.hpp"
#include "helpers.hpp"

using namespace avsync;
using avsync::testing::TempDir;

namespace {

ModelConfig small_model(HeadKind head) {
  ModelConfig cfg;
  cfg.head = head;
  cfg.d = 8;
  return cfg;
}

Sample speaking_sample(std::uint64_t seed) {
  SynthConfig cfg;
  Rng rng(seed);
  Sample s = gen_sample(SampleClass::kSyncSpeaking, cfg, rng);
  s.face.video_id = "v";
  s.face.track_id = "v_t0";
  return s;
}

nn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("every head returns one probability per frame") {
    const Sample s = speaking_sample(1);
    for (auto head : {HeadKind::kSync, HeadKind::kRothNet, HeadKind::kProduct}) {
      auto model = make_model(small_model(head), 3);
      const auto p = model->predict(s);
      REQUIRE(p.size() == s.frames());
      for (double v : p) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      nn::Graph g;
      const ModelInput in = model_input(s);
      const auto e = model->encode(g, in);
      CHECK(g.value(e.visual).rows() == static_cast<Eigen::Index>(s.frames()));
      CHECK(g.value(e.audio).rows() == static_cast<Eigen::Index>(s.frames()));
      CHECK(g.value(e.visual).cols() == 8);
    }
  }

  TEST_CASE("head names") {
    for (auto head : {HeadKind::kSync, HeadKind::kRothNet, HeadKind::kProduct}) {
      CHECK(head_from_string(to_string(head)) == head);
    }
    CHECK_THROWS_AS(head_from_string("talknet"), ConfigError);
    auto cfg = small_model(HeadKind::kSync);
    cfg.d = 7;
    CHECK_THROWS_AS(make_model(cfg, 1), ConfigError);
  }

  TEST_CASE("audio rows must be four per frame") {
    auto model = make_model(small_model(HeadKind::kSync), 1);
    ModelInput in = model_input(speaking_sample(2));
    in.audio.conservativeResize(in.audio.rows() + 1, Eigen::NoChange);
    in.audio.bottomRows(1).setZero();
    CHECK_THROWS_AS(model->predict(in), DimensionError);
  }

  TEST_CASE("window frames replicate the track edges") {
    using W = std::vector<std::size_t>;
    CHECK(RothNetModel::window_frames(0, 20, 11) == W{0, 0, 0, 0, 0, 0, 1, 2, 3, 4, 5});
    CHECK(RothNetModel::window_frames(19, 20, 11) == W{14, 15, 16, 17, 18, 19, 19, 19, 19, 19, 19});
    CHECK(RothNetModel::window_frames(10, 20, 5) == W{8, 9, 10, 11, 12});
    CHECK(RothNetModel::window_frames(1, 2, 3) == W{0, 1, 1});
  }

  TEST_CASE("product head multiplies the two branch probabilities") {
    auto model = make_model(small_model(HeadKind::kProduct), 4);
    nn::Matrix scores(3, 2);
    scores << 0.0, 0.0, 2.0, -1.0, -3.0, 5.0;
    const auto p = model->probabilities(scores);
    for (int t = 0; t < 3; ++t) {
      CHECK(p[t] == doctest::Approx(nn::sigmoid_value(scores(t, 0)) * nn::sigmoid_value(scores(t, 1))));
    }
  }

  TEST_CASE("sync backend without positional encoding is frame-permutation equivariant") {
    auto cfg = small_model(HeadKind::kSync);
    cfg.pe_cross = false;
    cfg.pe_self = false;
    auto model = make_model(cfg, 5);
    Rng rng(6);
    const nn::Matrix V = random_matrix(6, 8, rng), A = random_matrix(6, 8, rng);
    const std::vector<int> perm = {2, 5, 0, 1, 4, 3};
    nn::Matrix Vp(6, 8), Ap(6, 8);
    for (int i = 0; i < 6; ++i) {
      Vp.row(i) = V.row(perm[i]);
      Ap.row(i) = A.row(perm[i]);
    }
    auto scores = [&](const nn::Matrix& v, const nn::Matrix& a) {
      nn::Graph g;
      return nn::Matrix(g.value(model->decode(g, g.constant(v), g.constant(a))));
    };
    const nn::Matrix base = scores(V, A), permuted = scores(Vp, Ap);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(permuted(i, 0) - base(perm[i], 0)) < 1e-12);

    model->set_pe_flags(true, true);
    const nn::Matrix with_pe = scores(Vp, Ap);
    double diff = 0.0;
    for (int i = 0; i < 6; ++i) diff = std::max(diff, std::abs(with_pe(i, 0) - scores(V, A)(perm[i], 0)));
    CHECK(diff > 1e-9);
  }

  TEST_CASE("initialization depends only on the seed") {
    auto a = make_model(small_model(HeadKind::kSync), 9);
    auto cfg = small_model(HeadKind::kSync);
    cfg.pe_cross = false;
    auto b = make_model(cfg, 9);
    auto c = make_model(small_model(HeadKind::kSync), 10);
    REQUIRE(a->params().size() == b->params().size());
    bool differs = false;
    for (std::size_t i = 0; i < a->params().size(); ++i) {
      CHECK(a->params()[i].value == b->params()[i].value);
      differs = differs || a->params()[i].value != c->params()[i].value;
    }
    CHECK(differs);
  }

  TEST_CASE("checkpoint round-trip") {
    TempDir dir("ckpt");
    const Sample s = speaking_sample(7);
    for (auto head : {HeadKind::kSync, HeadKind::kRothNet, HeadKind::kProduct}) {
      auto model = make_model(small_model(head), 11);
      save_model(*model, dir / "a");
      auto loaded = load_model(dir / "a");
      CHECK(loaded->config().head == head);
      CHECK(loaded->config().d == 8);
      const auto p = model->predict(s), q = loaded->predict(s);
      for (std::size_t t = 0; t < p.size(); ++t) CHECK(std::abs(p[t] - q[t]) < 1e-5);
      save_model(*loaded, dir / "b");
      CHECK(avsync::testing::same_tree(dir / "a", dir / "b"));
    }
    CHECK_THROWS(load_model(dir / "missing"));
  }
}
