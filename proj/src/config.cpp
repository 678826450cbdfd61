#include "avsync/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "avsync/errors.hpp"

namespace avsync {
namespace {

using nlohmann::json;

void reject_unknown(const json& section, std::string_view where, const std::set<std::string>& allowed) {
  if (!section.is_object()) throw ConfigError(std::string(where) + " must be a table");
  for (const auto& [key, _] : section.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void read(const json& section, const char* key, T& into, std::string_view where) {
  if (!section.contains(key)) return;
  try {
    into = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + "." + key + " has the wrong type");
  }
}

void read_synth(const json& j, SynthConfig& s) {
  reject_unknown(j, "synth",
                 {"seed", "T_min", "T_max", "Hv", "Wv", "Ha", "sigma_v", "sigma_a", "smoothness", "counts"});
  read(j, "seed", s.seed, "synth");
  read(j, "T_min", s.T_min, "synth");
  read(j, "T_max", s.T_max, "synth");
  read(j, "Hv", s.Hv, "synth");
  read(j, "Wv", s.Wv, "synth");
  read(j, "Ha", s.Ha, "synth");
  read(j, "sigma_v", s.sigma_v, "synth");
  read(j, "sigma_a", s.sigma_a, "synth");
  read(j, "smoothness", s.smoothness, "synth");
  if (!j.contains("counts")) return;
  const json& counts = j.at("counts");
  reject_unknown(counts, "synth.counts", {"train", "val", "test"});
  s.counts.clear();
  for (const auto& [split_name, per_class] : counts.items()) {
    const Split split = split_from_string(split_name);
    const std::string where = "synth.counts." + split_name;
    if (!per_class.is_object()) throw ConfigError(where + " must be a table");
    for (const auto& [cls_name, n] : per_class.items()) {
      SampleClass cls;
      try {
        cls = class_from_name(cls_name);
      } catch (const ConfigError&) {
        throw ConfigError("unknown key '" + cls_name + "' in " + where);
      }
      if (!n.is_number_integer()) throw ConfigError(where + "." + cls_name + " must be an integer");
      s.counts[split][cls] = n.get<int>();
    }
  }
}

void read_train(const json& j, TrainConfig& t) {
  reject_unknown(j, "train",
                 {"beta", "frames_per_batch", "epochs", "lr", "seed", "contrastive", "pe_cross", "pe_self",
                  "head", "d", "window", "checkpoint_every", "jobs"});
  read(j, "beta", t.beta, "train");
  read(j, "frames_per_batch", t.frames_per_batch, "train");
  read(j, "epochs", t.epochs, "train");
  read(j, "lr", t.lr, "train");
  read(j, "seed", t.seed, "train");
  read(j, "contrastive", t.contrastive, "train");
  read(j, "pe_cross", t.pe_cross, "train");
  read(j, "pe_self", t.pe_self, "train");
  if (j.contains("head")) {
    if (!j.at("head").is_string()) throw ConfigError("train.head must be a string");
    t.head = head_from_string(j.at("head").get<std::string>());
  }
  read(j, "d", t.d, "train");
  read(j, "window", t.window, "train");
  read(j, "checkpoint_every", t.checkpoint_every, "train");
  read(j, "jobs", t.jobs, "train");
}

void read_eval(const json& j, EvalOptions& e) {
  reject_unknown(j, "eval", {"proportions", "threshold", "proportion", "min_shift_ms", "mask_fraction"});
  read(j, "proportions", e.proportions, "eval");
  read(j, "threshold", e.threshold, "eval");
  read(j, "proportion", e.proportion, "eval");
  read(j, "min_shift_ms", e.min_shift_ms, "eval");
  read(j, "mask_fraction", e.mask_fraction, "eval");
  for (std::size_t i = 1; i < e.proportions.size(); ++i) {
    if (!(e.proportions[i] > e.proportions[i - 1])) throw ConfigError("eval.proportions must increase");
  }
  for (double p : e.proportions) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("eval.proportions must lie in [0, 1]");
  }
  if (!(e.proportion >= 0.0 && e.proportion <= 1.0)) throw ConfigError("eval.proportion must lie in [0, 1]");
  if (!(e.mask_fraction > 0.0 && e.mask_fraction <= 1.0)) throw ConfigError("eval.mask_fraction must lie in (0, 1]");
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  json counts = json::object();
  for (const auto& [split, per_class] : synth.counts) {
    json row = json::object();
    for (const auto& [cls, n] : per_class) row[std::string(class_name(cls))] = n;
    counts[std::string(to_string(split))] = row;
  }
  json train_json = train.to_json();
  train_json["jobs"] = train.jobs;
  return {{"synth",
           {{"seed", synth.seed},
            {"T_min", synth.T_min},
            {"T_max", synth.T_max},
            {"Hv", synth.Hv},
            {"Wv", synth.Wv},
            {"Ha", synth.Ha},
            {"sigma_v", synth.sigma_v},
            {"sigma_a", synth.sigma_a},
            {"smoothness", synth.smoothness},
            {"counts", counts}}},
          {"train", train_json},
          {"eval",
           {{"proportions", eval.proportions},
            {"threshold", eval.threshold},
            {"proportion", eval.proportion},
            {"min_shift_ms", eval.min_shift_ms},
            {"mask_fraction", eval.mask_fraction}}}};
}

RunConfig parse_run_config(const nlohmann::json& document) {
  reject_unknown(document, "config", {"synth", "train", "eval"});
  RunConfig cfg;
  for (const char* section : {"synth", "train"}) {
    if (document.contains(section) && document.at(section).is_object() && document.at(section).contains("seed")) {
      cfg.seed_given = true;
    }
  }
  if (document.contains("synth")) read_synth(document.at("synth"), cfg.synth);
  if (document.contains("train")) read_train(document.at("train"), cfg.train);
  if (document.contains("eval")) read_eval(document.at("eval"), cfg.eval);
  cfg.synth.validate();
  cfg.train.validate();
  return cfg;
}

nlohmann::json parse_toml(std::string_view text) {
  try {
    const toml::table table = toml::parse(text);
    std::ostringstream out;
    out << toml::json_formatter{table};
    return json::parse(out.str());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto ext = path.extension().string();
  json document;
  if (ext == ".toml") {
    document = parse_toml(text);
  } else if (ext == ".json") {
    try {
      document = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("JSON parse error in " + path.string() + ": " + e.what());
    }
  } else {
    throw ConfigError("config file must end in .toml or .json: " + path.string());
  }
  return parse_run_config(document);
}

}  // namespace avsync
