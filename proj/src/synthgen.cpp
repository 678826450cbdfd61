#include "avsync/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "avsync/errors.hpp"
#include "avsync/parallel.hpp"

namespace avsync {
namespace {

constexpr double kMouthRest = 0.1;
constexpr double kMouthGain = 0.8;
constexpr double kTemplateNorm = 2.0;
constexpr int kMaxEnvelopeDraws = 1000;

// Gaussian noise clipped at 3 sigma.
double clipped_noise(Rng& rng, double sigma) {
  if (sigma == 0.0) return 0.0;
  return sigma * std::clamp(rng.normal(), -3.0, 3.0);
}

// Drive with short speaking runs removed, plus the labels it paints.
struct Drive {
  std::vector<double> envelope;
  LabelSeq labels;
};

Drive speaking_drive(std::size_t T, int smoothness, Rng& rng, bool require_positive) {
  for (int attempt = 0; attempt < kMaxEnvelopeDraws; ++attempt) {
    Drive d{gen_envelope(T, smoothness, rng), LabelSeq(T, 0)};
    for (std::size_t t = 0; t < T; ++t) d.labels[t] = d.envelope[t] > kSpeakingThreshold ? 1 : 0;
    for (const auto& seg : extract_speaking_segments(d.labels)) {
      if (seg.length() >= kMinRunFrames) continue;
      for (std::size_t t = seg.start; t < seg.end; ++t) {
        d.labels[t] = 0;
        d.envelope[t] = 0.0;
      }
    }
    if (!require_positive || std::find(d.labels.begin(), d.labels.end(), 1) != d.labels.end()) {
      return d;
    }
  }
  throw Error("synthgen: no speaking run of " + std::to_string(kMinRunFrames) +
              " frames after repeated envelope draws (T=" + std::to_string(T) + ")");
}

FaceTrack render_face(std::size_t T, const SynthConfig& cfg, const std::vector<double>& mouth,
                      Rng& rng) {
  FaceTrack f;
  f.frames = T;
  f.height = static_cast<std::size_t>(cfg.Hv);
  f.width = static_cast<std::size_t>(cfg.Wv);
  f.pixels.resize(T * f.height * f.width);
  const std::size_t mouth_start = f.height - mouth_rows(f.height);
  std::vector<double> texture(mouth_start * f.width);
  for (auto& v : texture) v = rng.uniform(0.3, 0.7);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t r = 0; r < f.height; ++r) {
      for (std::size_t c = 0; c < f.width; ++c) {
        const double base =
            r < mouth_start ? texture[r * f.width + c] : kMouthRest + kMouthGain * mouth[t];
        f.at(t, r, c) = static_cast<float>(std::clamp(base + clipped_noise(rng, cfg.sigma_v), 0.0, 1.0));
      }
    }
  }
  return f;
}

AudioFeatures render_audio(std::size_t T, const SynthConfig& cfg, const std::vector<double>& drive,
                           Rng& rng) {
  const auto pattern = speech_template(cfg.Ha);
  AudioFeatures a;
  a.rows = kAudioRowsPerFrame * T;
  a.coeffs = static_cast<std::size_t>(cfg.Ha);
  a.values.resize(a.rows * a.coeffs);
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double e = drive[r / kAudioRowsPerFrame];
    for (std::size_t k = 0; k < a.coeffs; ++k) {
      a.at(r, k) = static_cast<float>(e * pattern[k] + clipped_noise(rng, cfg.sigma_a));
    }
  }
  return a;
}

}  // namespace

std::string_view class_name(SampleClass cls) {
  switch (cls) {
    case SampleClass::kSyncSpeaking: return "SyncSpeaking";
    case SampleClass::kSilent: return "Silent";
    case SampleClass::kVisualOnly: return "VisualOnly";
    case SampleClass::kAudioOnly: return "AudioOnly";
    case SampleClass::kDubbed: return "Dubbed";
  }
  return "SyncSpeaking";
}

SampleClass class_from_name(std::string_view name) {
  for (auto cls : kAllClasses) {
    if (class_name(cls) == name) return cls;
  }
  throw ConfigError("unknown sample class '" + std::string(name) + "'");
}

SynthConfig SynthConfig::desk_default() {
  SynthConfig cfg;
  cfg.counts[Split::kTrain] = {{SampleClass::kSyncSpeaking, 160},
                               {SampleClass::kSilent, 80},
                               {SampleClass::kVisualOnly, 80},
                               {SampleClass::kAudioOnly, 80}};
  cfg.counts[Split::kVal] = {{SampleClass::kSyncSpeaking, 20},
                             {SampleClass::kSilent, 10},
                             {SampleClass::kVisualOnly, 10},
                             {SampleClass::kAudioOnly, 10}};
  cfg.counts[Split::kTest] = {{SampleClass::kSyncSpeaking, 40},
                              {SampleClass::kSilent, 20},
                              {SampleClass::kVisualOnly, 20},
                              {SampleClass::kAudioOnly, 20},
                              {SampleClass::kDubbed, 20}};
  return cfg;
}

int SynthConfig::count(Split split, SampleClass cls) const {
  const auto s = counts.find(split);
  if (s == counts.end()) return 0;
  const auto c = s->second.find(cls);
  return c == s->second.end() ? 0 : c->second;
}

void SynthConfig::validate() const {
  for (const auto& [split, per_class] : counts) {
    for (const auto& [cls, n] : per_class) {
      if (n < 0) throw ConfigError("negative count for " + std::string(class_name(cls)));
      if (cls == SampleClass::kDubbed && split == Split::kTrain && n > 0) {
        throw ConfigError("Dubbed samples are evaluation-only; the train split cannot hold them");
      }
    }
  }
  if (T_min < 12) throw ConfigError("T_min must be >= 12");
  if (T_max < T_min) throw ConfigError("T_max must be >= T_min");
  if (Hv < 4 || Wv < 4) throw ConfigError("Hv and Wv must be >= 4");
  if (Ha < 1) throw ConfigError("Ha must be >= 1");
  if (!(sigma_v >= 0.0) || !(sigma_a >= 0.0)) throw ConfigError("noise levels must be >= 0");
  if (smoothness < 1) throw ConfigError("smoothness must be >= 1");
}

std::size_t mouth_rows(std::size_t height) {
  // The epsilon keeps exact products (0.3 * 10) from rounding up a row.
  return static_cast<std::size_t>(std::ceil(kMouthFraction * static_cast<double>(height) - 1e-9));
}

std::vector<double> speech_template(int Ha) {
  std::vector<double> p(static_cast<std::size_t>(Ha));
  double norm = 0.0;
  for (int k = 0; k < Ha; ++k) {
    p[k] = std::cos(1.3 * k + 0.4) / std::sqrt(1.0 + k);
    norm += p[k] * p[k];
  }
  for (auto& v : p) v *= kTemplateNorm / std::sqrt(norm);
  return p;
}

std::vector<double> gen_envelope(std::size_t length, int smoothness, Rng& rng) {
  const auto w = static_cast<std::size_t>(std::max(smoothness, 1));
  std::vector<double> noise(length + w - 1);
  for (auto& u : noise) u = rng.uniform();
  std::vector<double> env(length);
  for (std::size_t t = 0; t < length; ++t) {
    double acc = 0.0;
    for (std::size_t j = 0; j < w; ++j) acc += noise[t + j];
    env[t] = acc / static_cast<double>(w);
  }
  const auto [lo, hi] = std::minmax_element(env.begin(), env.end());
  const double min = *lo, range = *hi - *lo;
  for (auto& v : env) v = range > 0.0 ? (v - min) / range : 0.0;
  return env;
}

Sample gen_sample(SampleClass cls, const SynthConfig& cfg, Rng& rng) {
  const auto T = static_cast<std::size_t>(rng.between(cfg.T_min, cfg.T_max));
  if (T < static_cast<std::size_t>(cfg.T_min)) throw Error("synthgen: sampled T below T_min");
  const std::vector<double> rest(T, 0.0);

  Sample s;
  s.class_tag = std::string(class_name(cls));
  switch (cls) {
    case SampleClass::kSyncSpeaking: {
      auto d = speaking_drive(T, cfg.smoothness, rng, true);
      s.face = render_face(T, cfg, d.envelope, rng);
      s.audio = render_audio(T, cfg, d.envelope, rng);
      s.labels = std::move(d.labels);
      break;
    }
    case SampleClass::kSilent:
      s.face = render_face(T, cfg, rest, rng);
      s.audio = render_audio(T, cfg, rest, rng);
      s.labels.assign(T, 0);
      break;
    case SampleClass::kVisualOnly: {
      const auto d = speaking_drive(T, cfg.smoothness, rng, false);
      s.face = render_face(T, cfg, d.envelope, rng);
      s.audio = render_audio(T, cfg, rest, rng);
      s.labels.assign(T, 0);
      break;
    }
    case SampleClass::kAudioOnly: {
      const auto d = speaking_drive(T, cfg.smoothness, rng, false);
      s.face = render_face(T, cfg, rest, rng);
      s.audio = render_audio(T, cfg, d.envelope, rng);
      s.labels.assign(T, 0);
      break;
    }
    case SampleClass::kDubbed: {
      // Labels follow the visible speaker, as in dubbed movies annotated from
      // the original soundtrack.
      auto visual = speaking_drive(T, cfg.smoothness, rng, true);
      const auto voice = speaking_drive(T, cfg.smoothness, rng, false);
      s.face = render_face(T, cfg, visual.envelope, rng);
      s.audio = render_audio(T, cfg, voice.envelope, rng);
      s.labels = std::move(visual.labels);
      break;
    }
  }
  return s;
}

Corpus gen_corpus(const SynthConfig& cfg, int jobs) {
  cfg.validate();
  struct Job {
    SampleClass cls;
    Split split;
  };
  std::vector<Job> plan;
  for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
    for (auto cls : kAllClasses) {
      for (int i = 0; i < cfg.count(split, cls); ++i) plan.push_back({cls, split});
    }
  }
  const Rng root(cfg.seed);
  Corpus corpus{cfg.seed, std::vector<Sample>(plan.size())};
  parallel_for(plan.size(), jobs, [&](std::size_t k) {
    Rng rng = root.fork(k);
    Sample s = gen_sample(plan[k].cls, cfg, rng);
    char id[32];
    std::snprintf(id, sizeof id, "v%05zu", k);
    s.face.video_id = id;
    s.face.track_id = std::string(id) + "_t0";
    s.split = plan[k].split;
    corpus.samples[k] = std::move(s);
  });
  return corpus;
}

std::vector<double> mouth_intensity(const FaceTrack& face) {
  const std::size_t start = face.height - mouth_rows(face.height);
  std::vector<double> out(face.frames, 0.0);
  for (std::size_t t = 0; t < face.frames; ++t) {
    double acc = 0.0;
    for (std::size_t r = start; r < face.height; ++r) {
      for (std::size_t c = 0; c < face.width; ++c) acc += face.at(t, r, c);
    }
    out[t] = acc / static_cast<double>((face.height - start) * face.width);
  }
  return out;
}

std::vector<double> audio_energy(const AudioFeatures& audio) {
  const std::size_t T = audio.rows / kAudioRowsPerFrame;
  std::vector<double> out(T, 0.0);
  for (std::size_t r = 0; r < T * kAudioRowsPerFrame; ++r) {
    double sq = 0.0;
    for (std::size_t k = 0; k < audio.coeffs; ++k) sq += double(audio.at(r, k)) * audio.at(r, k);
    out[r / kAudioRowsPerFrame] += std::sqrt(sq) / kAudioRowsPerFrame;
  }
  return out;
}

}  // namespace avsync
