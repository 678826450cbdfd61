#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "avsync/rng.hpp"
#include "avsync/trackdata.hpp"

namespace avsync {

// Unsynchronization augmentations and modality probes.

enum class AugmentKind { kMismatch, kMisalign };

std::string_view to_string(AugmentKind kind);
AugmentKind augment_kind_from_string(std::string_view name);

inline constexpr int kAudioRowMs = 1000 / kAudioRowsPerSecond;
// Audio delays above this are perceptible.
inline constexpr int kPerceptibleAudioDelayMs = 125;

struct ShiftSpec {
  int min_shift_ms = 130;

  // Smallest row shift honoring min_shift_ms; throws if it is not above 125 ms.
  std::size_t min_rows() const;
};

// Replaces the audio of every speaking segment with a window from a speaking
// segment of a different video and zeroes the segment's labels. Donor windows
// come from the unmodified input and are cycled when shorter than the target.
Corpus mismatch_set(const Corpus& corpus, Rng& rng);

// Circular shift of rows: out[r] = in[(r - shift) mod L].
std::vector<float> misalign_segment(const std::vector<float>& rows, std::size_t row_width,
                                    std::int64_t shift);

// Circularly shifts the audio inside each speaking segment by a signed row
// count with magnitude in [min_rows, L - min_rows] and zeroes the segment's
// labels.
Corpus misalign_set(const Corpus& corpus, const ShiftSpec& spec, Rng& rng);

// Replaces floor(proportion * n) samples of `original` by their counterparts in
// `unsync`. The chosen ids are a prefix of one rng-driven permutation, so
// calls with the same rng state nest across proportions.
Corpus curate(const Corpus& original, const Corpus& unsync, double proportion, const Rng& rng);

// Indices (into original) that curate would take from unsync.
std::vector<std::size_t> curate_selection(std::size_t n, double proportion, const Rng& rng);

// Audio replaced by `silent_row` on every row (zeros when absent, i.e. for
// direct-feature corpora; pass the MFCC of a zero waveform for WAV-derived
// corpora). Labels are kept.
Sample silence_audio(const Sample& sample,
                     const std::optional<std::vector<float>>& silent_row = std::nullopt);

// Zeroes the lowest ceil(fraction * Hv) pixel rows of every frame.
Sample mask_bottom(const Sample& sample, double fraction = 0.3);

Corpus silence_audio(const Corpus& corpus);
Corpus mask_bottom(const Corpus& corpus, double fraction = 0.3);

}  // namespace avsync
