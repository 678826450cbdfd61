#include "avsync/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "avsync/errors.hpp"
#include "avsync/evalmetrics.hpp"
#include "avsync/nn/checkpoint.hpp"
#include "avsync/nn/ops.hpp"
#include "avsync/nn/optim.hpp"
#include "avsync/parallel.hpp"

namespace avsync {

using nn::Graph;
using nn::Gradients;
using nn::Matrix;
using nn::Var;

namespace {

constexpr std::uint64_t kTrainStream = 0x747261696eULL;

std::vector<double> as_targets(const LabelSeq& labels) {
  return std::vector<double>(labels.begin(), labels.end());
}

}  // namespace

void TrainConfig::validate() const {
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (frames_per_batch == 0) throw ConfigError("frames_per_batch must be positive");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (d == 0 || d % 2 != 0) throw ConfigError("d must be even and positive");
  if (window == 0 || window % 2 == 0) throw ConfigError("window must be odd");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"beta", beta},
          {"frames_per_batch", frames_per_batch},
          {"epochs", epochs},
          {"lr", lr},
          {"seed", seed},
          {"contrastive", contrastive},
          {"pe_cross", pe_cross},
          {"pe_self", pe_self},
          {"head", std::string(to_string(head))},
          {"d", d},
          {"window", window},
          {"checkpoint_every", checkpoint_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.beta = j.value("beta", c.beta);
  c.frames_per_batch = j.value("frames_per_batch", c.frames_per_batch);
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.seed = j.value("seed", c.seed);
  c.contrastive = j.value("contrastive", c.contrastive);
  c.pe_cross = j.value("pe_cross", c.pe_cross);
  c.pe_self = j.value("pe_self", c.pe_self);
  if (j.contains("head")) c.head = head_from_string(j.at("head").get<std::string>());
  c.d = j.value("d", c.d);
  c.window = j.value("window", c.window);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  return c;
}

ModelConfig model_config(const TrainConfig& cfg, const Corpus& corpus) {
  if (corpus.samples.empty()) throw ConfigError("training set is empty");
  const Sample& first = corpus.samples.front();
  ModelConfig m;
  m.head = cfg.head;
  m.d = cfg.d;
  m.Hv = first.face.height;
  m.Wv = first.face.width;
  m.Ha = first.audio.coeffs;
  m.pe_cross = cfg.pe_cross;
  m.pe_self = cfg.pe_self;
  m.window = cfg.window;
  return m;
}

std::vector<std::vector<std::size_t>> pack_batches(std::span<const std::size_t> lengths,
                                                   std::span<const std::size_t> order,
                                                   std::size_t frames_per_batch) {
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> current;
  std::size_t frames = 0;
  for (auto i : order) {
    if (lengths[i] > frames_per_batch) {
      throw ConfigError("track " + std::to_string(i) + " has " + std::to_string(lengths[i]) +
                        " frames, above the batch budget of " + std::to_string(frames_per_batch));
    }
    if (!current.empty() && frames + lengths[i] > frames_per_batch) {
      batches.push_back(std::move(current));
      current.clear();
      frames = 0;
    }
    current.push_back(i);
    frames += lengths[i];
  }
  if (!current.empty()) batches.push_back(std::move(current));
  return batches;
}

std::vector<std::vector<std::size_t>> assemble_batches(std::span<const std::size_t> lengths,
                                                       std::size_t frames_per_batch, Rng& rng) {
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  return pack_batches(lengths, order, frames_per_batch);
}

std::optional<std::vector<std::size_t>> sample_derangement(std::size_t n, Rng& rng) {
  if (n < 2) return std::nullopt;
  std::vector<std::size_t> perm(n);
  for (;;) {
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i) fixed = perm[i] == i;
    if (!fixed) return perm;
  }
}

std::vector<std::size_t> positive_set(std::span<const BatchItem> batch) {
  std::vector<std::size_t> gamma;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (double y : batch[i].targets) {
      if (y > 0.5) {
        gamma.push_back(i);
        break;
      }
    }
  }
  return gamma;
}

BatchLoss batch_loss(const AsdModel& model, std::span<const BatchItem> batch,
                     const std::vector<std::size_t>* partner, double beta, int jobs) {
  const std::size_t n = batch.size();
  if (n == 0) throw ConfigError("empty batch");
  const auto& params = model.params();

  // Frontends, once per sample.
  std::vector<Graph> frontends(n);
  std::vector<Embeddings> emb(n);
  parallel_for(n, jobs, [&](std::size_t i) { emb[i] = model.encode(frontends[i], *batch[i].input); });

  struct Term {
    std::size_t visual = 0, audio = 0, length = 0;
    std::vector<double> targets;
    double weight = 0.0;
    double value = 0.0;
    Matrix d_visual, d_audio;
    Gradients grads;
  };
  std::vector<Term> terms;
  const auto add_term = [&](std::size_t v, std::size_t a, std::size_t len, std::vector<double> targets,
                            double weight) {
    Term t;
    t.visual = v;
    t.audio = a;
    t.length = len;
    t.targets = std::move(targets);
    t.weight = weight;
    terms.push_back(std::move(t));
  };
  for (std::size_t i = 0; i < n; ++i) {
    add_term(i, i, batch[i].targets.size(), batch[i].targets, 1.0 / static_cast<double>(n));
  }
  std::size_t pairs = 0;
  if (partner != nullptr) {
    const auto gamma = positive_set(batch);
    if (partner->size() != gamma.size()) throw DimensionError("partner map does not cover the positive set");
    for (std::size_t k = 0; k < gamma.size(); ++k) {
      if ((*partner)[k] == k || (*partner)[k] >= gamma.size()) {
        throw ConfigError("partner map is not a derangement of the positive set");
      }
    }
    for (std::size_t k = 0; k < gamma.size(); ++k) {
      const std::size_t v = gamma[k], a = gamma[(*partner)[k]];
      const std::size_t len = std::min(batch[v].targets.size(), batch[a].targets.size());
      add_term(v, a, len, std::vector<double>(len, 0.0), beta / static_cast<double>(gamma.size()));
    }
    pairs = gamma.size();
  }

  // Backend terms on detached copies of the embeddings.
  parallel_for(terms.size(), jobs, [&](std::size_t k) {
    Term& t = terms[k];
    const auto rows = static_cast<Eigen::Index>(t.length);
    Graph g;
    const Var v = g.leaf(frontends[t.visual].value(emb[t.visual].visual).topRows(rows));
    const Var a = g.leaf(frontends[t.audio].value(emb[t.audio].audio).topRows(rows));
    const Var loss = model.loss(g, model.decode(g, v, a), t.targets);
    t.value = g.value(loss)(0, 0);
    g.backward(nn::scale(g, loss, t.weight));
    t.d_visual = g.grad(v);
    t.d_audio = g.grad(a);
    t.grads = params.zero_gradients();
    g.collect(t.grads);
  });

  BatchLoss out;
  out.pairs = pairs;
  out.grads = params.zero_gradients();
  std::vector<Matrix> d_visual(n), d_audio(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_visual[i] = Matrix::Zero(frontends[i].value(emb[i].visual).rows(), frontends[i].value(emb[i].visual).cols());
    d_audio[i] = Matrix::Zero(frontends[i].value(emb[i].audio).rows(), frontends[i].value(emb[i].audio).cols());
  }
  double contrastive_sum = 0.0;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const Term& t = terms[k];
    const auto rows = static_cast<Eigen::Index>(t.length);
    if (k < n) {
      out.supervised += t.value / static_cast<double>(n);
    } else {
      contrastive_sum += t.value;
    }
    d_visual[t.visual].topRows(rows) += t.d_visual;
    d_audio[t.audio].topRows(rows) += t.d_audio;
    nn::accumulate(out.grads, t.grads);
  }
  if (pairs > 0) out.contrastive = contrastive_sum / static_cast<double>(pairs);
  out.total = out.supervised + beta * out.contrastive;

  std::vector<Gradients> frontend_grads(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const std::pair<Var, Matrix> seeds[] = {{emb[i].visual, std::move(d_visual[i])},
                                            {emb[i].audio, std::move(d_audio[i])}};
    frontends[i].backward(seeds);
    frontend_grads[i] = params.zero_gradients();
    frontends[i].collect(frontend_grads[i]);
  });
  for (const auto& g : frontend_grads) nn::accumulate(out.grads, g);
  return out;
}

TrainResult train(const Corpus& train_set, const Corpus& val_set, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  TrainResult result;
  result.model = make_model(model_config(cfg, train_set), cfg.seed);
  result.first_batch_sup_loss = std::numeric_limits<double>::quiet_NaN();
  AsdModel& model = *result.model;

  std::vector<ModelInput> inputs;
  std::vector<BatchItem> items;
  std::vector<std::size_t> lengths;
  inputs.reserve(train_set.samples.size());
  for (const auto& s : train_set.samples) {
    if (s.frames() > cfg.frames_per_batch) {
      throw ConfigError("track '" + s.id() + "' has " + std::to_string(s.frames()) +
                        " frames, above frames_per_batch " + std::to_string(cfg.frames_per_batch));
    }
    inputs.push_back(model_input(s));
    lengths.push_back(s.frames());
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    items.push_back({&inputs[i], as_targets(train_set.samples[i].labels)});
  }
  bool val_usable = false;
  for (const auto& s : val_set.samples) val_usable = val_usable || s.has_positive();

  Rng rng = Rng(cfg.seed).fork(kTrainStream);
  auto adam = nn::AdamState::for_params(model.params());
  const nn::AdamOptions adam_options{cfg.lr};
  const auto started = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = assemble_batches(lengths, cfg.frames_per_batch, rng);
    double sup = 0.0, contr = 0.0, total = 0.0;
    std::size_t contr_batches = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<BatchItem> batch;
      for (auto i : batches[b]) batch.push_back(items[i]);
      std::optional<std::vector<std::size_t>> partner;
      if (cfg.contrastive) partner = sample_derangement(positive_set(batch).size(), rng);
      BatchLoss loss = batch_loss(model, batch, partner ? &*partner : nullptr, cfg.beta, cfg.jobs);
      if (!std::isfinite(loss.total)) {
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b) + " (first track '" +
                           train_set.samples[batches[b].front()].id() + "')");
      }
      if (epoch == 1 && b == 0) result.first_batch_sup_loss = loss.supervised;
      nn::adam_step(model.params(), loss.grads, adam, adam_options);
      sup += loss.supervised;
      total += loss.total;
      if (loss.pairs > 0) {
        contr += loss.contrastive;
        ++contr_batches;
      }
    }
    EpochLog row;
    row.epoch = epoch;
    row.sup_loss = sup / static_cast<double>(batches.size());
    row.contr_loss = contr_batches > 0 ? contr / static_cast<double>(contr_batches) : 0.0;
    row.total_loss = total / static_cast<double>(batches.size());
    row.val_map = val_usable ? map_eval(model, val_set, cfg.jobs) : std::numeric_limits<double>::quiet_NaN();
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);
    if (hooks.out_dir && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 &&
        epoch != cfg.epochs) {
      save_model(model, *hooks.out_dir / ("checkpoint_epoch" + std::to_string(epoch)));
    }
  }
  return result;
}

void write_train_log(const std::filesystem::path& path, std::span<const EpochLog> log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,sup_loss,contr_loss,val_map,wall_seconds\n";
  for (const auto& r : log) {
    out << r.epoch << ',' << format_real(r.sup_loss) << ',' << format_real(r.contr_loss) << ','
        << format_real(r.val_map) << ',' << format_real(r.wall_seconds) << '\n';
  }
}

void save_model(const AsdModel& model, const std::filesystem::path& directory) {
  nn::save_checkpoint(model.params(), {{"model", model.config().to_json()}}, directory);
}

std::unique_ptr<AsdModel> load_model(const std::filesystem::path& directory) {
  const auto ckpt = nn::load_checkpoint(directory);
  if (!ckpt.meta.contains("model")) throw FormatError("checkpoint has no model config");
  auto model = make_model(ModelConfig::from_json(ckpt.meta.at("model")), 0);
  nn::assign_params(model->params(), ckpt.params);
  return model;
}

}  // namespace avsync

#include "avsync/synthgen.hpp"

namespace avsync {

std::vector<HeadGradCheck> check_training_losses(std::uint64_t seed) {
  SynthConfig synth;
  synth.counts[Split::kTrain] = {{SampleClass::kSyncSpeaking, 3}, {SampleClass::kSilent, 1}};
  synth.T_min = 12;
  synth.T_max = 13;
  synth.Hv = 4;
  synth.Wv = 4;
  synth.Ha = 3;
  synth.seed = seed;
  const Corpus corpus = gen_corpus(synth);

  std::vector<ModelInput> inputs;
  for (const auto& s : corpus.samples) inputs.push_back(model_input(s));
  std::vector<BatchItem> batch;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    batch.push_back({&inputs[i], as_targets(corpus.samples[i].labels)});
  }
  Rng rng = Rng(seed).fork(kTrainStream);
  const auto partner = sample_derangement(positive_set(batch).size(), rng);

  struct Case {
    std::string name;
    HeadKind head;
    bool pe;
  };
  const Case cases[] = {{"sync", HeadKind::kSync, true},
                        {"sync-no-pe", HeadKind::kSync, false},
                        {"rothnet", HeadKind::kRothNet, false},
                        {"product", HeadKind::kProduct, false}};
  std::vector<HeadGradCheck> out;
  for (const auto& c : cases) {
    ModelConfig mc;
    mc.head = c.head;
    mc.d = 4;
    mc.Hv = synth.Hv;
    mc.Wv = synth.Wv;
    mc.Ha = synth.Ha;
    mc.pe_cross = mc.pe_self = c.pe;
    auto model = make_model(mc, seed);
    // Default init leaves attention nearly uniform and some gradients near
    // 1e-10, below what central differences can resolve.
    Rng spread = Rng(seed).fork(0x67726164ULL);
    for (auto& p : model->params()) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = spread.uniform(-1.0, 1.0);
    }
    const nn::LossFn loss = [&](const nn::ParamSet&, nn::Gradients* grads) {
      BatchLoss l = batch_loss(*model, batch, partner ? &*partner : nullptr, 1.0);
      if (grads != nullptr) nn::accumulate(*grads, l.grads);
      return l.total;
    };
    out.push_back({c.name, nn::grad_check(loss, model->params())});
  }
  return out;
}

}  // namespace avsync
