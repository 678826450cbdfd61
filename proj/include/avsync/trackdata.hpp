#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avsync {

inline constexpr int kVideoFps = 25;
inline constexpr int kAudioRowsPerSecond = 100;
inline constexpr int kAudioRowsPerFrame = kAudioRowsPerSecond / kVideoFps;

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

// Grayscale face crops, [frames x height x width], intensities in [0, 1].
struct FaceTrack {
  std::string video_id;
  std::string track_id;
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  float& at(std::size_t t, std::size_t r, std::size_t c) {
    return pixels[(t * height + r) * width + c];
  }
  float at(std::size_t t, std::size_t r, std::size_t c) const {
    return pixels[(t * height + r) * width + c];
  }
  bool operator==(const FaceTrack&) const = default;
};

// Audio feature rows at 100 rows/second: 4 rows per video frame.
struct AudioFeatures {
  std::size_t rows = 0;
  std::size_t coeffs = 0;
  std::vector<float> values;

  float& at(std::size_t r, std::size_t k) { return values[r * coeffs + k]; }
  float at(std::size_t r, std::size_t k) const { return values[r * coeffs + k]; }
  bool operator==(const AudioFeatures&) const = default;
};

using LabelSeq = std::vector<std::uint8_t>;

// Half-open run of positive frames [start, end).
struct SpeakingSegment {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool operator==(const SpeakingSegment&) const = default;
};

struct Sample {
  FaceTrack face;
  AudioFeatures audio;
  LabelSeq labels;
  std::string class_tag;
  Split split = Split::kTrain;

  const std::string& id() const { return face.track_id; }
  std::size_t frames() const { return face.frames; }
  bool has_positive() const;
  bool operator==(const Sample&) const = default;
};

// Throws FormatError naming the broken invariant.
void validate_sample(const Sample& sample);

struct Corpus {
  std::uint64_t seed = 0;
  std::vector<Sample> samples;

  bool operator==(const Corpus&) const = default;
};

// Samples of one split, in corpus order.
Corpus select_split(const Corpus& corpus, Split split);
Corpus filter_class(const Corpus& corpus, std::string_view class_prefix, bool keep);

std::vector<SpeakingSegment> extract_speaking_segments(std::span<const std::uint8_t> labels);

// Writes manifest.json plus one AVT1 file per tensor (frames, audio, labels).
void save_corpus(const Corpus& corpus, const std::filesystem::path& directory);
Corpus load_corpus(const std::filesystem::path& directory);

// --- real-audio ingestion --------------------------------------------------

inline constexpr int kWavSampleRate = 16000;

struct MfccOptions {
  int sample_rate = kWavSampleRate;
  double window_seconds = 0.025;
  double hop_seconds = 0.010;
  double pre_emphasis = 0.97;
  int mel_filters = 26;
  int fft_size = 512;
  double log_floor = 1e-10;
};

// Double-precision MFCC matrix, row-major [rows x n_coeffs]. Rows =
// floor(samples / hop); the tail is zero-padded so the last window fits.
std::vector<double> mfcc_matrix(std::span<const double> waveform, int n_coeffs,
                                const MfccOptions& options = {});
std::size_t mfcc_row_count(std::size_t n_samples, const MfccOptions& options = {});

// When target_rows is set the rows are truncated or zero-padded to it (4T for
// the paired track).
AudioFeatures mfcc_from_wav(std::span<const double> waveform, int n_coeffs,
                            std::optional<std::size_t> target_rows = std::nullopt);

// PCM 16-bit mono 16 kHz only; samples scaled to [-1, 1).
std::vector<double> read_wav_pcm16(const std::filesystem::path& path);
void write_wav_pcm16(const std::filesystem::path& path, std::span<const double> samples);

}  // namespace avsync
