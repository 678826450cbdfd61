#include "avsync/nn/checkpoint.hpp"

#include <fstream>

#include "avsync/errors.hpp"
#include "avsync/tensor_io.hpp"

namespace avsync::nn {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr int kCheckpointVersion = 1;
}

void save_checkpoint(const ParamSet& params, const json& meta, const fs::path& directory) {
  fs::create_directories(directory);
  json index;
  index["version"] = kCheckpointVersion;
  index["meta"] = meta;
  index["params"] = json::object();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Param& p = params[i];
    FloatTensor t{{static_cast<std::uint32_t>(p.value.rows()), static_cast<std::uint32_t>(p.value.cols())}, {}};
    t.values.resize(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index k = 0; k < p.value.size(); ++k) t.values[k] = static_cast<float>(p.value.data()[k]);
    const std::string file = p.name + ".avt";
    write_file_bytes(directory / file, encode_tensor(t));
    index["params"][p.name] = file;
  }
  std::ofstream out(directory / "index.json", std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint index in " + directory.string());
  out << index.dump(2) << '\n';
}

Checkpoint load_checkpoint(const fs::path& directory) {
  std::ifstream in(directory / "index.json");
  if (!in) throw Error("no index.json in " + directory.string());
  Checkpoint ck;
  try {
    const json index = json::parse(in);
    if (index.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version");
    }
    ck.meta = index.at("meta");
    for (const auto& [name, file] : index.at("params").items()) {
      const FloatTensor t = decode_tensor(read_file_bytes(directory / file.get<std::string>()));
      if (t.shape.size() != 2) throw FormatError("parameter '" + name + "' is not a matrix");
      Matrix m(t.shape[0], t.shape[1]);
      for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = t.values[k];
      ck.params.add(name, std::move(m));
    }
  } catch (const json::exception& e) {
    throw FormatError("index.json: " + std::string(e.what()));
  }
  return ck;
}

void assign_params(ParamSet& target, const ParamSet& source) {
  for (auto& p : target) {
    if (!source.contains(p.name)) throw FormatError("checkpoint lacks parameter '" + p.name + "'");
    const Matrix& v = source[source.index_of(p.name)].value;
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      throw FormatError("parameter '" + p.name + "' has shape " + shape_string(v) + ", model expects " +
                        shape_string(p.value));
    }
    p.value = v;
  }
}

}  // namespace avsync::nn
