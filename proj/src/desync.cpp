#include "avsync/desync.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "avsync/errors.hpp"

namespace avsync {
namespace {

std::string segment_name(const Sample& s, const SpeakingSegment& seg) {
  return "segment [" + std::to_string(seg.start) + ", " + std::to_string(seg.end) +
         ") of sample '" + s.id() + "'";
}

}  // namespace

std::string_view to_string(AugmentKind kind) {
  return kind == AugmentKind::kMismatch ? "mismatch" : "misalign";
}

AugmentKind augment_kind_from_string(std::string_view name) {
  if (name == "mismatch") return AugmentKind::kMismatch;
  if (name == "misalign") return AugmentKind::kMisalign;
  throw ConfigError("unknown augmentation kind '" + std::string(name) + "'");
}

std::size_t ShiftSpec::min_rows() const {
  if (min_shift_ms <= kPerceptibleAudioDelayMs) {
    throw ConfigError("min_shift_ms must exceed " + std::to_string(kPerceptibleAudioDelayMs));
  }
  return static_cast<std::size_t>((min_shift_ms + kAudioRowMs - 1) / kAudioRowMs);
}

Corpus mismatch_set(const Corpus& corpus, Rng& rng) {
  struct Donor {
    std::size_t sample;
    SpeakingSegment seg;
  };
  std::vector<Donor> donors;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    for (const auto& seg : extract_speaking_segments(corpus.samples[i].labels)) {
      donors.push_back({i, seg});
    }
  }

  Corpus out = corpus;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const Sample& src = corpus.samples[i];
    Sample& dst = out.samples[i];
    const auto segments = extract_speaking_segments(src.labels);
    if (segments.empty()) continue;
    const std::size_t width = src.audio.coeffs;
    for (const auto& seg : segments) {
      std::vector<const Donor*> candidates;
      for (const auto& d : donors) {
        if (corpus.samples[d.sample].face.video_id != src.face.video_id) candidates.push_back(&d);
      }
      if (candidates.empty()) {
        throw AugmentationInfeasible("no speaking segment from another video can donate audio to " +
                                     segment_name(src, seg));
      }
      const Donor& d = *candidates[rng.below(candidates.size())];
      const AudioFeatures& donor_audio = corpus.samples[d.sample].audio;
      if (donor_audio.coeffs != width) {
        throw DimensionError("donor audio width differs for " + segment_name(src, seg));
      }
      const std::size_t rows = kAudioRowsPerFrame * seg.length();
      const std::size_t donor_rows = kAudioRowsPerFrame * d.seg.length();
      const std::size_t donor_start = kAudioRowsPerFrame * d.seg.start;
      const std::size_t offset = donor_rows > rows ? rng.below(donor_rows - rows + 1) : 0;
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t from = donor_start + (offset + r) % donor_rows;
        const std::size_t to = kAudioRowsPerFrame * seg.start + r;
        std::copy_n(donor_audio.values.begin() + from * width, width,
                    dst.audio.values.begin() + to * width);
      }
      std::fill(dst.labels.begin() + seg.start, dst.labels.begin() + seg.end, 0);
    }
    dst.class_tag += "+mismatch";
  }
  return out;
}

std::vector<float> misalign_segment(const std::vector<float>& rows, std::size_t row_width,
                                    std::int64_t shift) {
  if (row_width == 0 || rows.size() % row_width != 0) {
    throw DimensionError("segment size is not a multiple of the row width");
  }
  const auto L = static_cast<std::int64_t>(rows.size() / row_width);
  if (L == 0) return rows;
  const std::int64_t s = ((shift % L) + L) % L;
  std::vector<float> out(rows.size());
  for (std::int64_t r = 0; r < L; ++r) {
    const std::int64_t from = (r - s + L) % L;
    std::copy_n(rows.begin() + from * static_cast<std::int64_t>(row_width), row_width,
                out.begin() + r * static_cast<std::int64_t>(row_width));
  }
  return out;
}

Corpus misalign_set(const Corpus& corpus, const ShiftSpec& spec, Rng& rng) {
  const std::size_t min_rows = spec.min_rows();
  Corpus out = corpus;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    Sample& s = out.samples[i];
    const auto segments = extract_speaking_segments(s.labels);
    if (segments.empty()) continue;
    const std::size_t width = s.audio.coeffs;
    std::string shifts;
    for (const auto& seg : segments) {
      const std::size_t rows = kAudioRowsPerFrame * seg.length();
      if (rows < 2 * min_rows) {
        throw AugmentationInfeasible(segment_name(s, seg) + " spans " + std::to_string(rows) +
                                     " audio rows; a circular shift above " +
                                     std::to_string(kPerceptibleAudioDelayMs) + " ms needs " +
                                     std::to_string(2 * min_rows));
      }
      const auto magnitude = rng.between(static_cast<std::int64_t>(min_rows),
                                         static_cast<std::int64_t>(rows - min_rows));
      const std::int64_t shift = rng.coin() ? magnitude : -magnitude;
      const auto first = s.audio.values.begin() +
                         static_cast<std::ptrdiff_t>(kAudioRowsPerFrame * seg.start * width);
      const std::vector<float> original(first, first + static_cast<std::ptrdiff_t>(rows * width));
      const auto shifted = misalign_segment(original, width, shift);
      std::copy(shifted.begin(), shifted.end(), first);
      std::fill(s.labels.begin() + seg.start, s.labels.begin() + seg.end, 0);
      shifts += (shifts.empty() ? "" : ",") + std::to_string(shift);
    }
    s.class_tag += "+misalign:" + shifts;
  }
  return out;
}

std::vector<std::size_t> curate_selection(std::size_t n, double proportion, const Rng& rng) {
  if (!(proportion >= 0.0 && proportion <= 1.0)) {
    throw ConfigError("proportion must lie in [0, 1]");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng local = rng;
  local.shuffle(order);
  const auto k = static_cast<std::size_t>(std::floor(proportion * static_cast<double>(n)));
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

Corpus curate(const Corpus& original, const Corpus& unsync, double proportion, const Rng& rng) {
  const auto chosen = curate_selection(original.samples.size(), proportion, rng);
  if (unsync.samples.size() != original.samples.size()) {
    throw ConfigError("unsynchronized set must hold the same samples as the original");
  }
  for (std::size_t i = 0; i < original.samples.size(); ++i) {
    if (original.samples[i].id() != unsync.samples[i].id()) {
      throw ConfigError("unsynchronized set is not derived from the original (id '" +
                        unsync.samples[i].id() + "' at position " + std::to_string(i) + ")");
    }
  }
  Corpus out = original;
  for (auto i : chosen) out.samples[i] = unsync.samples[i];
  return out;
}

Sample silence_audio(const Sample& sample, const std::optional<std::vector<float>>& silent_row) {
  Sample out = sample;
  if (!silent_row) {
    std::fill(out.audio.values.begin(), out.audio.values.end(), 0.0f);
    return out;
  }
  if (silent_row->size() != out.audio.coeffs) {
    throw DimensionError("silent row width differs from the audio width");
  }
  for (std::size_t r = 0; r < out.audio.rows; ++r) {
    std::copy(silent_row->begin(), silent_row->end(),
              out.audio.values.begin() + static_cast<std::ptrdiff_t>(r * out.audio.coeffs));
  }
  return out;
}

Sample mask_bottom(const Sample& sample, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("mask fraction must lie in (0, 1]");
  Sample out = sample;
  auto& f = out.face;
  const auto rows = std::min(
      f.height, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(f.height) - 1e-9)));
  for (std::size_t t = 0; t < f.frames; ++t) {
    for (std::size_t r = f.height - rows; r < f.height; ++r) {
      for (std::size_t c = 0; c < f.width; ++c) f.at(t, r, c) = 0.0f;
    }
  }
  return out;
}

Corpus silence_audio(const Corpus& corpus) {
  Corpus out{corpus.seed, {}};
  for (const auto& s : corpus.samples) out.samples.push_back(silence_audio(s));
  return out;
}

Corpus mask_bottom(const Corpus& corpus, double fraction) {
  Corpus out{corpus.seed, {}};
  for (const auto& s : corpus.samples) out.samples.push_back(mask_bottom(s, fraction));
  return out;
}

}  // namespace avsync
