#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

#include "avsync/errors.hpp"
#include "avsync/tensor_io.hpp"
#include "avsync/trackdata.hpp"

namespace avsync {
namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters on FFT bins, [filters x (fft_size/2 + 1)].
std::vector<double> mel_filterbank(const MfccOptions& o) {
  const int bins = o.fft_size / 2 + 1;
  const double low = hz_to_mel(0.0);
  const double high = hz_to_mel(o.sample_rate / 2.0);
  std::vector<int> edge(o.mel_filters + 2);
  for (int i = 0; i < o.mel_filters + 2; ++i) {
    const double hz = mel_to_hz(low + (high - low) * i / (o.mel_filters + 1));
    edge[i] = static_cast<int>(std::floor((o.fft_size + 1) * hz / o.sample_rate));
  }
  std::vector<double> bank(static_cast<std::size_t>(o.mel_filters) * bins, 0.0);
  for (int m = 0; m < o.mel_filters; ++m) {
    const int l = edge[m], c = edge[m + 1], r = edge[m + 2];
    for (int k = l; k < c; ++k) bank[m * bins + k] = double(k - l) / (c - l);
    for (int k = c; k < r; ++k) bank[m * bins + k] = double(r - k) / (r - c);
  }
  return bank;
}

}  // namespace

std::size_t mfcc_row_count(std::size_t n_samples, const MfccOptions& o) {
  const auto hop = static_cast<std::size_t>(std::lround(o.hop_seconds * o.sample_rate));
  return n_samples / hop;
}

std::vector<double> mfcc_matrix(std::span<const double> waveform, int n_coeffs,
                                const MfccOptions& o) {
  const auto window = static_cast<std::size_t>(std::lround(o.window_seconds * o.sample_rate));
  const auto hop = static_cast<std::size_t>(std::lround(o.hop_seconds * o.sample_rate));
  if (waveform.empty()) throw Error("mfcc: empty waveform");
  if (waveform.size() < window) throw Error("mfcc: waveform shorter than one analysis window");
  if (n_coeffs < 1 || n_coeffs > o.mel_filters) {
    throw Error("mfcc: coefficient count must be in [1, " + std::to_string(o.mel_filters) + "]");
  }
  for (double x : waveform) {
    if (!std::isfinite(x)) throw NumericError("mfcc: non-finite waveform sample");
  }

  const std::size_t rows = mfcc_row_count(waveform.size(), o);
  std::vector<double> emphasized((rows - 1) * hop + window, 0.0);
  emphasized[0] = waveform[0];
  for (std::size_t n = 1; n < waveform.size(); ++n) {
    emphasized[n] = waveform[n] - o.pre_emphasis * waveform[n - 1];
  }

  std::vector<double> hamming(window);
  for (std::size_t n = 0; n < window; ++n) {
    hamming[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (window - 1));
  }
  const auto bank = mel_filterbank(o);
  const int bins = o.fft_size / 2 + 1;
  const int M = o.mel_filters;

  std::vector<double> frame(o.fft_size, 0.0);
  std::vector<fftw_complex> spectrum(bins);
  fftw_plan plan = fftw_plan_dft_r2c_1d(o.fft_size, frame.data(), spectrum.data(), FFTW_ESTIMATE);

  std::vector<double> out(rows * n_coeffs);
  std::vector<double> power(bins), log_energy(M);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (std::size_t n = 0; n < window; ++n) frame[n] = emphasized[r * hop + n] * hamming[n];
    fftw_execute(plan);
    for (int k = 0; k < bins; ++k) {
      power[k] = (spectrum[k][0] * spectrum[k][0] + spectrum[k][1] * spectrum[k][1]) / o.fft_size;
    }
    for (int m = 0; m < M; ++m) {
      double e = 0.0;
      for (int k = 0; k < bins; ++k) e += bank[m * bins + k] * power[k];
      log_energy[m] = std::log(std::max(e, o.log_floor));
    }
    // Orthonormal DCT-II.
    for (int c = 0; c < n_coeffs; ++c) {
      double acc = 0.0;
      for (int m = 0; m < M; ++m) {
        acc += log_energy[m] * std::cos(std::numbers::pi * c * (2.0 * m + 1.0) / (2.0 * M));
      }
      out[r * n_coeffs + c] = acc * std::sqrt((c == 0 ? 1.0 : 2.0) / M);
    }
  }
  fftw_destroy_plan(plan);
  return out;
}

AudioFeatures mfcc_from_wav(std::span<const double> waveform, int n_coeffs,
                            std::optional<std::size_t> target_rows) {
  const auto m = mfcc_matrix(waveform, n_coeffs);
  const std::size_t rows = m.size() / n_coeffs;
  AudioFeatures a;
  a.rows = target_rows.value_or(rows);
  a.coeffs = static_cast<std::size_t>(n_coeffs);
  a.values.assign(a.rows * a.coeffs, 0.0f);
  for (std::size_t i = 0; i < std::min(rows, a.rows) * a.coeffs; ++i) {
    a.values[i] = static_cast<float>(m[i]);
  }
  return a;
}

// --- WAV -----------------------------------------------------------------

namespace {

std::uint32_t le32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

std::vector<double> read_wav_pcm16(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string who = path.string() + ": ";
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE") {
    throw FormatError(who + "not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
    const std::uint32_t size = le32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw FormatError(who + "truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) throw FormatError(who + "short fmt chunk");
      const auto format = le16(bytes.data() + body);
      const auto channels = le16(bytes.data() + body + 2);
      const auto rate = le32(bytes.data() + body + 4);
      const auto bits = le16(bytes.data() + body + 14);
      if (format != 1 || channels != 1 || rate != kWavSampleRate || bits != 16) {
        throw FormatError(who + "only PCM 16-bit mono 16 kHz is supported");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(who + "data chunk before fmt chunk");
      std::vector<double> samples(size / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i)) / 32768.0;
      }
      return samples;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError(who + "no data chunk");
}

void write_wav_pcm16(const std::filesystem::path& path, std::span<const double> samples) {
  std::vector<std::uint8_t> b;
  const auto data_bytes = static_cast<std::uint32_t>(2 * samples.size());
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(b, 16);
  put16(b, 1);
  put16(b, 1);
  put32(b, kWavSampleRate);
  put32(b, kWavSampleRate * 2);
  put16(b, 2);
  put16(b, 16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put32(b, data_bytes);
  for (double x : samples) {
    const double clipped = std::clamp(x, -1.0, 32767.0 / 32768.0);
    put16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clipped * 32768.0))));
  }
  write_file_bytes(path, b);
}

}  // namespace avsync
