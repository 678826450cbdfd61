#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

#include "avsync/rng.hpp"
#include "avsync/trackdata.hpp"

namespace avsync {

// Synthetic audio-visual corpus in which synchronization is the only cue
// separating speaking tracks from hard negatives.

enum class SampleClass { kSyncSpeaking, kSilent, kVisualOnly, kAudioOnly, kDubbed };

inline constexpr std::array kAllClasses = {SampleClass::kSyncSpeaking, SampleClass::kSilent,
                                           SampleClass::kVisualOnly, SampleClass::kAudioOnly,
                                           SampleClass::kDubbed};

std::string_view class_name(SampleClass cls);
SampleClass class_from_name(std::string_view name);

// Frames whose envelope exceeds this are painted as speaking.
inline constexpr double kSpeakingThreshold = 0.2;
// Shorter speaking runs are relabeled 0 and their drive zeroed. 7 frames = 28
// audio rows, the shortest segment that admits a >125 ms circular shift in
// both directions.
inline constexpr std::size_t kMinRunFrames = 7;
// Share of frame rows (from the bottom) occupied by the mouth.
inline constexpr double kMouthFraction = 0.3;

struct SynthConfig {
  std::map<Split, std::map<SampleClass, int>> counts;
  int T_min = 24;
  int T_max = 64;
  int Hv = 16;
  int Wv = 16;
  int Ha = 13;
  double sigma_v = 0.05;
  double sigma_a = 0.1;
  int smoothness = 2;
  std::uint64_t seed = 1;

  // Train 400 (40% sync, 20% each other non-dubbed class), val 50, test 100 +
  // 20 dubbed.
  static SynthConfig desk_default();

  int count(Split split, SampleClass cls) const;
  void validate() const;  // throws ConfigError
};

std::size_t mouth_rows(std::size_t height);

// Audio coefficient pattern of a "speaking" frame; fixed for a given Ha.
std::vector<double> speech_template(int Ha);

// Moving average of uniform noise, min-max normalized to [0, 1]. A constant
// sequence (including length 1) normalizes to all zeros.
std::vector<double> gen_envelope(std::size_t length, int smoothness, Rng& rng);

// Ids and split are left for the caller to assign.
Sample gen_sample(SampleClass cls, const SynthConfig& cfg, Rng& rng);

// Pure function of cfg. Sample k (in split, class, index order) draws from
// Rng(cfg.seed).fork(k), so any `jobs` value gives identical output.
Corpus gen_corpus(const SynthConfig& cfg, int jobs = 1);

// Per-frame mean intensity of the mouth rows.
std::vector<double> mouth_intensity(const FaceTrack& face);
// Per-frame mean L2 norm of the frame's audio rows.
std::vector<double> audio_energy(const AudioFeatures& audio);

}  // namespace avsync
