#include "avsync/model.hpp"

#include <algorithm>

#include "avsync/errors.hpp"
#include "avsync/nn/ops.hpp"

namespace avsync {

using nn::Graph;
using nn::Matrix;
using nn::Var;

namespace {
constexpr std::size_t kFrontendKernel = 5;
}

std::string_view to_string(HeadKind head) {
  switch (head) {
    case HeadKind::kSync: return "sync";
    case HeadKind::kRothNet: return "rothnet";
    case HeadKind::kProduct: return "product";
  }
  return "sync";
}

HeadKind head_from_string(std::string_view name) {
  if (name == "sync") return HeadKind::kSync;
  if (name == "rothnet") return HeadKind::kRothNet;
  if (name == "product") return HeadKind::kProduct;
  throw ConfigError("unknown head '" + std::string(name) + "'");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"head", std::string(to_string(head))},
          {"d", d},
          {"Hv", Hv},
          {"Wv", Wv},
          {"Ha", Ha},
          {"pe_cross", pe_cross},
          {"pe_self", pe_self},
          {"window", window}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.head = head_from_string(j.at("head").get<std::string>());
  c.d = j.at("d").get<std::size_t>();
  c.Hv = j.at("Hv").get<std::size_t>();
  c.Wv = j.at("Wv").get<std::size_t>();
  c.Ha = j.at("Ha").get<std::size_t>();
  c.pe_cross = j.at("pe_cross").get<bool>();
  c.pe_self = j.at("pe_self").get<bool>();
  c.window = j.at("window").get<std::size_t>();
  return c;
}

ModelInput model_input(const Sample& s) {
  ModelInput in;
  in.T = s.face.frames;
  const auto pixels = static_cast<Eigen::Index>(s.face.height * s.face.width);
  in.frames.resize(static_cast<Eigen::Index>(in.T), pixels);
  for (Eigen::Index i = 0; i < in.frames.size(); ++i) in.frames.data()[i] = s.face.pixels[i];
  in.audio.resize(static_cast<Eigen::Index>(s.audio.rows), static_cast<Eigen::Index>(s.audio.coeffs));
  for (Eigen::Index i = 0; i < in.audio.size(); ++i) in.audio.data()[i] = s.audio.values[i];
  return in;
}

VisualFrontend VisualFrontend::create(nn::ParamSet& params, std::size_t pixels, std::size_t d, Rng& rng) {
  VisualFrontend f;
  f.project = nn::LinearParams::create(params, "visual.project", pixels, d, rng);
  f.temporal = nn::ConvParams::create(params, "visual.temporal", d, d, kFrontendKernel, 1, rng);
  f.output = nn::LinearParams::create(params, "visual.output", d, d, rng);
  return f;
}

Var VisualFrontend::apply(Graph& g, const nn::ParamSet& params, Var frames) const {
  const Var per_frame = project.apply(g, params, frames);
  return output.apply(g, params, nn::relu(g, temporal.apply(g, params, per_frame)));
}

AudioFrontend AudioFrontend::create(nn::ParamSet& params, std::size_t Ha, std::size_t d, Rng& rng) {
  AudioFrontend f;
  f.first = nn::ConvParams::create(params, "audio.conv1", Ha, d, kFrontendKernel, 2, rng);
  f.second = nn::ConvParams::create(params, "audio.conv2", d, d, kFrontendKernel, 2, rng);
  return f;
}

Var AudioFrontend::apply(Graph& g, const nn::ParamSet& params, Var mfcc) const {
  const auto rows = static_cast<std::size_t>(g.value(mfcc).rows());
  if (rows % kAudioRowsPerFrame != 0) {
    throw DimensionError("audio frontend: " + std::to_string(rows) +
                         " rows is not a multiple of " + std::to_string(kAudioRowsPerFrame));
  }
  return second.apply(g, params, nn::relu(g, first.apply(g, params, mfcc)));
}

Embeddings AsdModel::encode(Graph& g, const ModelInput& input) const {
  ++encode_calls_;
  return encode_impl(g, input);
}

Var AsdModel::loss(Graph& g, Var scores, std::span<const double> targets) const {
  return nn::bce_with_logits(g, scores, targets);
}

std::vector<double> AsdModel::probabilities(const Matrix& scores) const {
  std::vector<double> p(static_cast<std::size_t>(scores.rows()));
  for (std::size_t t = 0; t < p.size(); ++t) p[t] = nn::sigmoid_value(scores(static_cast<Eigen::Index>(t), 0));
  return p;
}

std::vector<double> AsdModel::predict(const ModelInput& input) const {
  Graph g;
  const Embeddings e = encode(g, input);
  return probabilities(g.value(decode(g, e.visual, e.audio)));
}

std::vector<double> AsdModel::predict(const Sample& sample) const { return predict(model_input(sample)); }

// --- sync head -------------------------------------------------------------

SyncModel::SyncModel(const ModelConfig& config, Rng& rng) : AsdModel(config) {
  const std::size_t d = config.d;
  visual_ = VisualFrontend::create(params_, config.Hv * config.Wv, d, rng);
  audio_ = AudioFrontend::create(params_, config.Ha, d, rng);
  audio_to_visual_ = nn::AttentionParams::create(params_, "cross.audio_to_visual", d, rng);
  visual_to_audio_ = nn::AttentionParams::create(params_, "cross.visual_to_audio", d, rng);
  fusion_ = nn::AttentionParams::create(params_, "self", 2 * d, rng);
  classifier_ = nn::LinearParams::create(params_, "classifier", 2 * d, 1, rng);
}

Embeddings SyncModel::encode_impl(Graph& g, const ModelInput& input) const {
  return {visual_.apply(g, params_, g.constant(input.frames)),
          audio_.apply(g, params_, g.constant(input.audio))};
}

Var SyncModel::decode(Graph& g, Var visual, Var audio) const {
  const Matrix& V = g.value(visual);
  const Matrix& A = g.value(audio);
  const auto d = static_cast<Eigen::Index>(config_.d);
  if (V.cols() != d || A.cols() != d || V.rows() != A.rows()) {
    throw DimensionError("sync backend: V " + nn::shape_string(V) + " vs A " + nn::shape_string(A) +
                         " at width " + std::to_string(d));
  }
  // Attention(X, Y) takes queries from Y: F_a->v = Attention(A, V).
  const Var a2v = nn::attention(g, params_, audio_to_visual_, audio, visual, config_.pe_cross);
  const Var v2a = nn::attention(g, params_, visual_to_audio_, visual, audio, config_.pe_cross);
  const Var joint = nn::concat_cols(g, a2v, v2a);
  const Var fused = nn::attention(g, params_, fusion_, joint, joint, config_.pe_self);
  return classifier_.apply(g, params_, fused);
}

// --- windowed head ---------------------------------------------------------

RothNetModel::RothNetModel(const ModelConfig& config, Rng& rng) : AsdModel(config) {
  const std::size_t d = config.d;
  visual_ = VisualFrontend::create(params_, config.Hv * config.Wv, d, rng);
  audio_ = AudioFrontend::create(params_, config.Ha, d, rng);
  hidden_ = nn::LinearParams::create(params_, "mlp.hidden", 2 * d, d, rng);
  classifier_ = nn::LinearParams::create(params_, "classifier", d, 1, rng);
}

std::vector<std::size_t> RothNetModel::window_frames(std::size_t t, std::size_t T, std::size_t window) {
  const auto half = static_cast<std::int64_t>(window / 2);
  std::vector<std::size_t> frames;
  frames.reserve(window);
  for (std::int64_t k = -half; k < static_cast<std::int64_t>(window) - half; ++k) {
    const std::int64_t f = std::clamp<std::int64_t>(static_cast<std::int64_t>(t) + k, 0,
                                                    static_cast<std::int64_t>(T) - 1);
    frames.push_back(static_cast<std::size_t>(f));
  }
  return frames;
}

Embeddings RothNetModel::encode_impl(Graph& g, const ModelInput& input) const {
  const Var frames = g.constant(input.frames);
  const Var audio = g.constant(input.audio);
  std::vector<Var> visual_rows, audio_rows;
  for (std::size_t t = 0; t < input.T; ++t) {
    const auto window = window_frames(t, input.T, config_.window);
    std::vector<std::size_t> audio_index;
    audio_index.reserve(window.size() * kAudioRowsPerFrame);
    for (auto f : window) {
      for (int r = 0; r < kAudioRowsPerFrame; ++r) audio_index.push_back(f * kAudioRowsPerFrame + r);
    }
    const Var v = visual_.apply(g, params_, nn::gather_rows(g, frames, window));
    const Var a = audio_.apply(g, params_, nn::gather_rows(g, audio, audio_index));
    visual_rows.push_back(nn::mean_rows(g, v));
    audio_rows.push_back(nn::mean_rows(g, a));
  }
  return {nn::stack_rows(g, visual_rows), nn::stack_rows(g, audio_rows)};
}

Var RothNetModel::decode(Graph& g, Var visual, Var audio) const {
  const Var joint = nn::concat_cols(g, visual, audio);
  return classifier_.apply(g, params_, nn::relu(g, hidden_.apply(g, params_, joint)));
}

// --- product baseline ------------------------------------------------------

ProductModel::ProductModel(const ModelConfig& config, Rng& rng) : AsdModel(config) {
  const std::size_t d = config.d;
  visual_ = VisualFrontend::create(params_, config.Hv * config.Wv, d, rng);
  audio_ = AudioFrontend::create(params_, config.Ha, d, rng);
  audio_head_ = nn::LinearParams::create(params_, "vad.classifier", d, 1, rng);
  visual_head_ = nn::LinearParams::create(params_, "lip.classifier", d, 1, rng);
}

Embeddings ProductModel::encode_impl(Graph& g, const ModelInput& input) const {
  return {visual_.apply(g, params_, g.constant(input.frames)),
          audio_.apply(g, params_, g.constant(input.audio))};
}

Var ProductModel::decode(Graph& g, Var visual, Var audio) const {
  return nn::concat_cols(g, audio_head_.apply(g, params_, audio), visual_head_.apply(g, params_, visual));
}

Var ProductModel::loss(Graph& g, Var scores, std::span<const double> targets) const {
  return nn::bce_product(g, scores, targets);
}

std::vector<double> ProductModel::probabilities(const Matrix& scores) const {
  std::vector<double> p(static_cast<std::size_t>(scores.rows()));
  for (std::size_t t = 0; t < p.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    p[t] = nn::sigmoid_value(scores(r, 0)) * nn::sigmoid_value(scores(r, 1));
  }
  return p;
}

std::unique_ptr<AsdModel> make_model(const ModelConfig& config, std::uint64_t seed) {
  if (config.d == 0 || config.d % 2 != 0) throw ConfigError("model width d must be even and positive");
  Rng rng(seed);
  switch (config.head) {
    case HeadKind::kSync: return std::make_unique<SyncModel>(config, rng);
    case HeadKind::kRothNet: return std::make_unique<RothNetModel>(config, rng);
    case HeadKind::kProduct: return std::make_unique<ProductModel>(config, rng);
  }
  throw ConfigError("unknown head");
}

}  // namespace avsync
