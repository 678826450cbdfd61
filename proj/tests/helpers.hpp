#pragma once

#include <filesystem>
#include <string>

#include "avsync/trackdata.hpp"

namespace avsync::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Every file under both roots (relative path -> bytes) compared for equality;
// paths ending in one of `skip_suffixes` are ignored.
bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b,
               const std::vector<std::string>& skip_suffixes = {});

// Minimal sample with constant content; T frames of h x w, ha coefficients.
Sample make_sample(const std::string& video, std::size_t T, const LabelSeq& labels,
                   std::size_t h = 4, std::size_t w = 4, std::size_t ha = 3);

// Exhaustive average precision: each positive's precision at its rank, with
// earlier input positions winning ties, summed in rank order.
double brute_force_ap(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

}  // namespace avsync::testing
