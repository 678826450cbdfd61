#pragma once

#include <atomic>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "avsync/nn/graph.hpp"
#include "avsync/nn/layers.hpp"
#include "avsync/trackdata.hpp"

namespace avsync {

// Prediction heads:
//   kSync     cross-attention (both directions) -> self-attention -> linear
//   kRothNet  11-frame window per output frame, mean-pooled embeddings, MLP
//   kProduct  independent audio and visual heads; p = p_audio * p_visual
enum class HeadKind { kSync, kRothNet, kProduct };

std::string_view to_string(HeadKind head);
HeadKind head_from_string(std::string_view name);

struct ModelConfig {
  HeadKind head = HeadKind::kSync;
  std::size_t d = 32;
  std::size_t Hv = 16;
  std::size_t Wv = 16;
  std::size_t Ha = 13;
  bool pe_cross = true;
  bool pe_self = true;
  std::size_t window = 11;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Model-ready copies of a sample's tensors.
struct ModelInput {
  nn::Matrix frames;  // [T x Hv*Wv]
  nn::Matrix audio;   // [4T x Ha]
  std::size_t T = 0;
};

ModelInput model_input(const Sample& sample);

// Per-frame embeddings V and A, both [T x d].
struct Embeddings {
  nn::Var visual;
  nn::Var audio;
};

// Per-frame flatten -> linear to d, temporal conv (k5, s1), relu, linear d -> d.
struct VisualFrontend {
  nn::LinearParams project;
  nn::ConvParams temporal;
  nn::LinearParams output;

  static VisualFrontend create(nn::ParamSet& params, std::size_t pixels, std::size_t d, Rng& rng);
  nn::Var apply(nn::Graph& g, const nn::ParamSet& params, nn::Var frames) const;
};

// conv1d Ha -> d (k5, s2), relu, conv1d d -> d (k5, s2): [4T x Ha] -> [T x d].
struct AudioFrontend {
  nn::ConvParams first;
  nn::ConvParams second;

  static AudioFrontend create(nn::ParamSet& params, std::size_t Ha, std::size_t d, Rng& rng);
  nn::Var apply(nn::Graph& g, const nn::ParamSet& params, nn::Var mfcc) const;
};

class AsdModel {
 public:
  explicit AsdModel(ModelConfig config) : config_(config) {}
  virtual ~AsdModel() = default;
  AsdModel(const AsdModel&) = delete;
  AsdModel& operator=(const AsdModel&) = delete;

  const ModelConfig& config() const { return config_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  // Runs both frontends; counted for the one-encode-per-batch contract.
  Embeddings encode(nn::Graph& g, const ModelInput& input) const;

  // Backend f_b: per-frame scores from [T x d] embeddings.
  virtual nn::Var decode(nn::Graph& g, nn::Var visual, nn::Var audio) const = 0;

  // Mean per-frame loss of decode() scores against 0/1 targets.
  virtual nn::Var loss(nn::Graph& g, nn::Var scores, std::span<const double> targets) const;

  // Speaking probability per frame from decode() scores.
  virtual std::vector<double> probabilities(const nn::Matrix& scores) const;

  std::vector<double> predict(const ModelInput& input) const;
  std::vector<double> predict(const Sample& sample) const;

  std::size_t encode_calls() const { return encode_calls_.load(); }
  void reset_encode_calls() { encode_calls_ = 0; }

  void set_pe_flags(bool pe_cross, bool pe_self) {
    config_.pe_cross = pe_cross;
    config_.pe_self = pe_self;
  }

 protected:
  virtual Embeddings encode_impl(nn::Graph& g, const ModelInput& input) const = 0;

  ModelConfig config_;
  nn::ParamSet params_;

 private:
  mutable std::atomic<std::size_t> encode_calls_{0};
};

class SyncModel : public AsdModel {
 public:
  SyncModel(const ModelConfig& config, Rng& rng);

  nn::Var decode(nn::Graph& g, nn::Var visual, nn::Var audio) const override;

 protected:
  Embeddings encode_impl(nn::Graph& g, const ModelInput& input) const override;

 private:
  VisualFrontend visual_;
  AudioFrontend audio_;
  nn::AttentionParams audio_to_visual_;
  nn::AttentionParams visual_to_audio_;
  nn::AttentionParams fusion_;
  nn::LinearParams classifier_;
};

class RothNetModel : public AsdModel {
 public:
  RothNetModel(const ModelConfig& config, Rng& rng);

  nn::Var decode(nn::Graph& g, nn::Var visual, nn::Var audio) const override;

  // Frame indices of the window centred on t, edges replicated.
  static std::vector<std::size_t> window_frames(std::size_t t, std::size_t T, std::size_t window);

 protected:
  Embeddings encode_impl(nn::Graph& g, const ModelInput& input) const override;

 private:
  VisualFrontend visual_;
  AudioFrontend audio_;
  nn::LinearParams hidden_;
  nn::LinearParams classifier_;
};

class ProductModel : public AsdModel {
 public:
  ProductModel(const ModelConfig& config, Rng& rng);

  // [T x 2] logits: column 0 audio (VAD), column 1 visual (lip movement).
  nn::Var decode(nn::Graph& g, nn::Var visual, nn::Var audio) const override;
  nn::Var loss(nn::Graph& g, nn::Var scores, std::span<const double> targets) const override;
  std::vector<double> probabilities(const nn::Matrix& scores) const override;

 protected:
  Embeddings encode_impl(nn::Graph& g, const ModelInput& input) const override;

 private:
  VisualFrontend visual_;
  AudioFrontend audio_;
  nn::LinearParams audio_head_;
  nn::LinearParams visual_head_;
};

// Parameters are initialized from Rng(seed) in a fixed order, so equal seeds
// give equal weights regardless of the PE flags.
std::unique_ptr<AsdModel> make_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace avsync
