#include "helpers.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <map>

#include "avsync/tensor_io.hpp"

namespace avsync::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("avsync_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

std::map<std::string, std::vector<std::uint8_t>> tree(const fs::path& root, const std::vector<std::string>& skip) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).string();
    if (std::any_of(skip.begin(), skip.end(), [&](const std::string& s) { return rel.ends_with(s); })) continue;
    files[rel] = read_file_bytes(e.path());
  }
  return files;
}

}  // namespace

bool same_tree(const fs::path& a, const fs::path& b, const std::vector<std::string>& skip_suffixes) {
  return tree(a, skip_suffixes) == tree(b, skip_suffixes);
}

Sample make_sample(const std::string& video, std::size_t T, const LabelSeq& labels, std::size_t h,
                   std::size_t w, std::size_t ha) {
  Sample s;
  s.face.video_id = video;
  s.face.track_id = video + "_t0";
  s.face.frames = T;
  s.face.height = h;
  s.face.width = w;
  s.face.pixels.assign(T * h * w, 0.5f);
  s.audio.rows = 4 * T;
  s.audio.coeffs = ha;
  s.audio.values.resize(4 * T * ha);
  for (std::size_t i = 0; i < s.audio.values.size(); ++i) s.audio.values[i] = static_cast<float>(i % 97) / 97.0f;
  s.labels = labels;
  s.class_tag = "SyncSpeaking";
  s.split = Split::kTest;
  return s;
}

double brute_force_ap(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  std::vector<std::pair<int, double>> at_rank;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    int ranked = 0, hits = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] > s[i] || (s[j] == s[i] && j <= i)) {
        ++ranked;
        hits += y[j];
      }
    }
    at_rank.push_back({ranked, static_cast<double>(hits) / ranked});
  }
  std::sort(at_rank.begin(), at_rank.end());
  double sum = 0.0;
  for (const auto& [rank, precision] : at_rank) sum += precision;
  return sum / static_cast<double>(at_rank.size());
}

}  // namespace avsync::testing
