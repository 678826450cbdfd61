#include "avsync/trackdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "avsync/errors.hpp"
#include "avsync/tensor_io.hpp"

namespace avsync {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;

FloatTensor frames_tensor(const FaceTrack& face) {
  return {{static_cast<std::uint32_t>(face.frames), static_cast<std::uint32_t>(face.height),
           static_cast<std::uint32_t>(face.width)},
          face.pixels};
}

FloatTensor audio_tensor(const AudioFeatures& audio) {
  return {{static_cast<std::uint32_t>(audio.rows), static_cast<std::uint32_t>(audio.coeffs)},
          audio.values};
}

FloatTensor labels_tensor(const LabelSeq& labels) {
  FloatTensor t{{static_cast<std::uint32_t>(labels.size())}, {}};
  t.values.assign(labels.begin(), labels.end());
  return t;
}

void expect_shape(const FloatTensor& t, const std::vector<std::uint32_t>& shape,
                  const std::string& what) {
  if (t.shape != shape) {
    auto fmt = [](const std::vector<std::uint32_t>& s) {
      std::string out = "[";
      for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
      return out + "]";
    };
    throw FormatError(what + " has shape " + fmt(t.shape) + ", manifest says " + fmt(shape));
  }
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw FormatError("unknown split '" + std::string(name) + "'");
}

bool Sample::has_positive() const {
  return std::any_of(labels.begin(), labels.end(), [](std::uint8_t y) { return y != 0; });
}

void validate_sample(const Sample& s) {
  const auto& f = s.face;
  const std::string who = "sample '" + s.id() + "': ";
  if (f.frames < 1) throw FormatError(who + "face track has no frames");
  if (f.height < 4 || f.width < 4) throw FormatError(who + "frames smaller than 4x4");
  if (f.pixels.size() != f.frames * f.height * f.width) {
    throw FormatError(who + "pixel count does not match T x Hv x Wv");
  }
  for (float p : f.pixels) {
    if (!(p >= 0.0f && p <= 1.0f)) throw FormatError(who + "pixel intensity outside [0, 1]");
  }
  if (s.audio.rows != kAudioRowsPerFrame * f.frames) {
    throw FormatError(who + "audio has " + std::to_string(s.audio.rows) + " rows, expected " +
                      std::to_string(kAudioRowsPerFrame * f.frames));
  }
  if (s.audio.coeffs < 1) throw FormatError(who + "audio has no coefficients");
  if (s.audio.values.size() != s.audio.rows * s.audio.coeffs) {
    throw FormatError(who + "audio value count does not match its shape");
  }
  for (float v : s.audio.values) {
    if (!std::isfinite(v)) throw FormatError(who + "non-finite audio feature");
  }
  if (s.labels.size() != f.frames) throw FormatError(who + "label count differs from T");
  for (auto y : s.labels) {
    if (y > 1) throw FormatError(who + "label outside {0, 1}");
  }
}

Corpus select_split(const Corpus& corpus, Split split) {
  Corpus out{corpus.seed, {}};
  for (const auto& s : corpus.samples) {
    if (s.split == split) out.samples.push_back(s);
  }
  return out;
}

Corpus filter_class(const Corpus& corpus, std::string_view class_prefix, bool keep) {
  Corpus out{corpus.seed, {}};
  for (const auto& s : corpus.samples) {
    if (s.class_tag.starts_with(class_prefix) == keep) out.samples.push_back(s);
  }
  return out;
}

std::vector<SpeakingSegment> extract_speaking_segments(std::span<const std::uint8_t> labels) {
  std::vector<SpeakingSegment> segments;
  std::size_t t = 0;
  while (t < labels.size()) {
    if (labels[t] == 0) {
      ++t;
      continue;
    }
    const std::size_t start = t;
    while (t < labels.size() && labels[t] != 0) ++t;
    segments.push_back({start, t});
  }
  return segments;
}

void save_corpus(const Corpus& corpus, const fs::path& directory) {
  fs::create_directories(directory);
  json manifest;
  manifest["version"] = kManifestVersion;
  manifest["seed"] = corpus.seed;
  manifest["samples"] = json::array();
  std::set<std::string> ids;
  for (const auto& s : corpus.samples) {
    validate_sample(s);
    if (!ids.insert(s.id()).second) throw FormatError("duplicate sample id '" + s.id() + "'");
    json entry;
    entry["id"] = s.id();
    entry["video_id"] = s.face.video_id;
    entry["class_tag"] = s.class_tag;
    entry["split"] = std::string(to_string(s.split));
    entry["T"] = s.face.frames;
    entry["Hv"] = s.face.height;
    entry["Wv"] = s.face.width;
    entry["Ha"] = s.audio.coeffs;
    const std::pair<std::string, FloatTensor> parts[] = {
        {s.id() + ".frames.avt", frames_tensor(s.face)},
        {s.id() + ".audio.avt", audio_tensor(s.audio)},
        {s.id() + ".labels.avt", labels_tensor(s.labels)},
    };
    entry["files"] = json::array();
    entry["crc32s"] = json::array();
    for (const auto& [name, tensor] : parts) {
      const auto bytes = encode_tensor(tensor);
      write_file_bytes(directory / name, bytes);
      entry["files"].push_back(name);
      entry["crc32s"].push_back(crc32_of(bytes));
    }
    manifest["samples"].push_back(std::move(entry));
  }
  std::ofstream out(directory / "manifest.json", std::ios::trunc);
  if (!out) throw Error("cannot write manifest in " + directory.string());
  out << manifest.dump(2) << '\n';
}

Corpus load_corpus(const fs::path& directory) {
  const fs::path manifest_path = directory / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw Error("no manifest.json in " + directory.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  try {
    if (manifest.at("version").get<int>() != kManifestVersion) {
      throw FormatError("unsupported manifest version");
    }
    Corpus corpus;
    corpus.seed = manifest.at("seed").get<std::uint64_t>();
    for (const auto& entry : manifest.at("samples")) {
      const auto files = entry.at("files").get<std::vector<std::string>>();
      const auto crcs = entry.at("crc32s").get<std::vector<std::uint32_t>>();
      if (files.size() != 3 || crcs.size() != 3) {
        throw FormatError("sample entry must list 3 files and 3 checksums");
      }
      std::vector<FloatTensor> tensors;
      for (std::size_t i = 0; i < 3; ++i) {
        const auto bytes = read_file_bytes(directory / files[i]);
        const auto crc = crc32_of(bytes);
        if (crc != crcs[i]) {
          throw CorruptCorpusError("checksum mismatch in " + files[i] + " (stored " +
                                   std::to_string(crcs[i]) + ", computed " + std::to_string(crc) +
                                   ")");
        }
        tensors.push_back(decode_tensor(bytes));
      }
      const auto T = entry.at("T").get<std::uint32_t>();
      const auto Hv = entry.at("Hv").get<std::uint32_t>();
      const auto Wv = entry.at("Wv").get<std::uint32_t>();
      const auto Ha = entry.at("Ha").get<std::uint32_t>();
      expect_shape(tensors[0], {T, Hv, Wv}, files[0]);
      expect_shape(tensors[1], {kAudioRowsPerFrame * T, Ha}, files[1]);
      expect_shape(tensors[2], {T}, files[2]);

      Sample s;
      s.face.video_id = entry.at("video_id").get<std::string>();
      s.face.track_id = entry.at("id").get<std::string>();
      s.face.frames = T;
      s.face.height = Hv;
      s.face.width = Wv;
      s.face.pixels = std::move(tensors[0].values);
      s.audio.rows = kAudioRowsPerFrame * T;
      s.audio.coeffs = Ha;
      s.audio.values = std::move(tensors[1].values);
      s.labels.reserve(T);
      for (float y : tensors[2].values) {
        if (y != 0.0f && y != 1.0f) throw FormatError(files[2] + " holds a non-binary label");
        s.labels.push_back(static_cast<std::uint8_t>(y));
      }
      s.class_tag = entry.at("class_tag").get<std::string>();
      s.split = split_from_string(entry.at("split").get<std::string>());
      validate_sample(s);
      corpus.samples.push_back(std::move(s));
    }
    return corpus;
  } catch (const json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
}

}  // namespace avsync
