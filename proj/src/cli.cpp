#include "avsync/cli.hpp"

#include <cmath>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "avsync/config.hpp"
#include "avsync/errors.hpp"
#include "avsync/evalmetrics.hpp"

#ifndef AVSYNC_VERSION
#define AVSYNC_VERSION "0.0.0"
#endif

namespace avsync {

const char* tool_version() { return AVSYNC_VERSION; }

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;

  std::string in;
  std::string model;
  std::string unsync;
  std::string kind;
  std::optional<double> proportion;
  std::string head;
  bool no_contrastive = false;
  bool no_pe_cross = false;
  bool no_pe_self = false;
  bool silence = false;
  bool mask = false;
};

struct Context {
  std::string command;
  Options opt;
  RunConfig cfg;
  std::uint64_t seed = 0;
  std::ostream& out;
};

std::string one_line(std::string text) {
  for (auto& ch : text) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return text;
}

int fail(std::ostream& err, ExitCode code, const std::string& what) {
  err << "error " << static_cast<int>(code) << ": " << one_line(what) << '\n';
  return static_cast<int>(code);
}

void require_seed(const Context& ctx) {
  if (!ctx.opt.seed && !ctx.cfg.seed_given) {
    throw ConfigError("'" + ctx.command + "' is randomized: pass --seed or set a seed in the config file");
  }
}

void require_dir(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::is_directory(path)) throw ConfigError(std::string(flag) + " directory does not exist: " + path);
}

void write_json(const fs::path& path, const json& value) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << value.dump(2) << '\n';
}

void write_run_json(const Context& ctx, const json& extra = json::object()) {
  json run = {{"tool", "avsync"},
              {"version", tool_version()},
              {"command", ctx.command},
              {"seed", ctx.seed},
              {"config", ctx.cfg.to_json()}};
  json inputs = json::object();
  if (!ctx.opt.in.empty()) inputs["in"] = ctx.opt.in;
  if (!ctx.opt.model.empty()) inputs["model"] = ctx.opt.model;
  if (!ctx.opt.unsync.empty()) inputs["unsync"] = ctx.opt.unsync;
  run["inputs"] = inputs;
  run["options"] = extra;
  write_json(fs::path(ctx.opt.out) / "run.json", run);
}

Corpus eval_split(const Corpus& corpus) {
  return filter_class(select_split(corpus, Split::kTest), "Dubbed", false);
}

ShiftSpec shift_spec(const Context& ctx) { return ShiftSpec{ctx.cfg.eval.min_shift_ms}; }

void cmd_gen(Context& ctx) {
  require_seed(ctx);
  const Corpus corpus = gen_corpus(ctx.cfg.synth, ctx.cfg.train.jobs);
  save_corpus(corpus, ctx.opt.out);
  write_run_json(ctx);
  ctx.out << "generated " << corpus.samples.size() << " samples in " << ctx.opt.out << '\n';
}

void cmd_augment(Context& ctx) {
  require_seed(ctx);
  require_dir(ctx.opt.in, "--in");
  if (ctx.opt.kind.empty()) throw ConfigError("--kind is required (mismatch|misalign)");
  const AugmentKind kind = augment_kind_from_string(ctx.opt.kind);
  const double p = ctx.opt.proportion.value_or(1.0);
  const Corpus original = load_corpus(ctx.opt.in);
  const Corpus result = unsynced_test_set(original, kind, p, Rng(ctx.seed), shift_spec(ctx));
  save_corpus(result, ctx.opt.out);
  write_run_json(ctx, {{"kind", ctx.opt.kind}, {"proportion", p}});
  ctx.out << "augmented (" << ctx.opt.kind << ", p=" << format_real(p) << ") " << result.samples.size()
          << " samples into " << ctx.opt.out << '\n';
}

void cmd_train(Context& ctx) {
  require_seed(ctx);
  require_dir(ctx.opt.in, "--in");
  const Corpus corpus = load_corpus(ctx.opt.in);
  TrainHooks hooks;
  hooks.out_dir = ctx.opt.out;
  hooks.on_epoch = [&](const EpochLog& r) {
    ctx.out << "epoch " << r.epoch << " sup_loss " << format_real(r.sup_loss) << " contr_loss "
            << format_real(r.contr_loss) << " val_map " << format_real(r.val_map) << '\n';
  };
  const TrainResult result =
      train(select_split(corpus, Split::kTrain), select_split(corpus, Split::kVal), ctx.cfg.train, hooks);
  save_model(*result.model, fs::path(ctx.opt.out) / "model");
  write_train_log(fs::path(ctx.opt.out) / "train_log.csv", result.log);
  write_run_json(ctx);
}

void cmd_eval(Context& ctx) {
  require_dir(ctx.opt.in, "--in");
  require_dir(ctx.opt.model, "--model");
  const auto model = load_model(ctx.opt.model);
  Corpus test = eval_split(load_corpus(ctx.opt.in));
  json options = json::object();
  const double p = ctx.opt.proportion.value_or(ctx.cfg.eval.proportion);
  if (!ctx.opt.unsync.empty()) {
    require_dir(ctx.opt.unsync, "--unsync");
    const Corpus unsync = eval_split(load_corpus(ctx.opt.unsync));
    test = curate(test, unsync, p, Rng(ctx.seed).fork(2));
    options["proportion"] = p;
  } else if (!ctx.opt.kind.empty()) {
    require_seed(ctx);
    test = unsynced_test_set(test, augment_kind_from_string(ctx.opt.kind), p, Rng(ctx.seed), shift_spec(ctx));
    options["kind"] = ctx.opt.kind;
    options["proportion"] = p;
  }
  if (ctx.opt.silence) test = silence_audio(test);
  if (ctx.opt.mask) test = mask_bottom(test, ctx.cfg.eval.mask_fraction);
  options["silence"] = ctx.opt.silence;
  options["mask"] = ctx.opt.mask;

  const int jobs = ctx.cfg.train.jobs;
  const double map = map_eval(*model, test, jobs);
  const auto tpr = tpr_per_video(model_scorer(*model), test, ctx.cfg.eval.threshold, jobs);
  json report = {{"map", map}, {"samples", test.samples.size()}, {"per_video_tpr", tpr}};
  write_json(fs::path(ctx.opt.out) / "report.json", report);
  write_tpr_csv(fs::path(ctx.opt.out) / "tpr.csv", tpr);
  write_run_json(ctx, options);
  ctx.out << "map " << format_real(map) << '\n';
}

void cmd_sweep(Context& ctx) {
  require_seed(ctx);
  require_dir(ctx.opt.in, "--in");
  require_dir(ctx.opt.model, "--model");
  const auto model = load_model(ctx.opt.model);
  const Corpus test = eval_split(load_corpus(ctx.opt.in));
  std::vector<AugmentKind> kinds = {AugmentKind::kMismatch, AugmentKind::kMisalign};
  if (!ctx.opt.kind.empty()) kinds = {augment_kind_from_string(ctx.opt.kind)};
  json report = json::object();
  json kind_names = json::array();
  for (auto kind : kinds) {
    kind_names.push_back(std::string(to_string(kind)));
    const auto sweep = unsync_sweep(model_scorer(*model), test, kind, Rng(ctx.seed), ctx.cfg.eval.proportions,
                                    ctx.cfg.train.jobs, shift_spec(ctx));
    const std::string name(to_string(kind));
    write_sweep_csv(fs::path(ctx.opt.out) / ("sweep_" + name + ".csv"), sweep);
    report[name] = sweep_json(sweep);
    ctx.out << name << ":";
    for (const auto& pt : sweep) ctx.out << ' ' << (pt.map ? format_real(*pt.map) : "undefined");
    ctx.out << '\n';
  }
  write_json(fs::path(ctx.opt.out) / "report.json", report);
  write_run_json(ctx, {{"kinds", kind_names}});
}

void cmd_ablate(Context& ctx) {
  require_seed(ctx);
  require_dir(ctx.opt.in, "--in");
  const Corpus corpus = load_corpus(ctx.opt.in);
  const auto rows = ablation_grid(corpus, ctx.cfg.train, [&](const AblationRow& r) {
    ctx.out << r.name << ": mismatch " << format_real(r.mismatch_map) << " misalign "
            << format_real(r.misalign_map) << '\n';
  });
  write_ablation_csv(fs::path(ctx.opt.out) / "ablation.csv", rows);
  write_json(fs::path(ctx.opt.out) / "report.json", {{"ablation", ablation_json(rows)}});
  write_run_json(ctx);
}

void cmd_gradcheck(Context& ctx) {
  require_seed(ctx);
  const auto checks = check_training_losses(ctx.seed);
  json report = json::array();
  double worst = 0.0;
  for (const auto& c : checks) {
    worst = std::max(worst, c.result.max_relative_error);
    report.push_back({{"head", c.name},
                      {"max_relative_error", c.result.max_relative_error},
                      {"worst_param", c.result.worst_param},
                      {"worst_index", c.result.worst_index},
                      {"coordinates", c.result.coordinates}});
    ctx.out << c.name << " max relative error " << format_real(c.result.max_relative_error) << " ("
            << c.result.worst_param << "[" << c.result.worst_index << "])\n";
  }
  write_json(fs::path(ctx.opt.out) / "report.json", {{"gradcheck", report}, {"max_relative_error", worst}});
  write_run_json(ctx);
  if (!(worst < 1e-5)) {
    throw NumericError("gradient check failed: max relative error " + format_real(worst) + " >= 1e-05");
  }
}

void cmd_rank_dubbed(Context& ctx) {
  require_dir(ctx.opt.in, "--in");
  require_dir(ctx.opt.model, "--model");
  const auto model = load_model(ctx.opt.model);
  const Corpus test = select_split(load_corpus(ctx.opt.in), Split::kTest);
  const auto ranking = rank_dubbed(model_scorer(*model), test, ctx.cfg.eval.threshold, ctx.cfg.train.jobs);
  write_tpr_csv(fs::path(ctx.opt.out) / "tpr.csv", ranking.tpr);
  write_json(fs::path(ctx.opt.out) / "report.json", {{"per_video_tpr", ranking.tpr},
                                                     {"dubbed_videos", ranking.dubbed_videos},
                                                     {"median_non_dubbed_tpr", ranking.median_other},
                                                     {"violations", ranking.violations}});
  write_run_json(ctx);
  ctx.out << ranking.dubbed_videos.size() << " dubbed videos, median non-dubbed TPR "
          << format_real(ranking.median_other) << ", violations " << ranking.violations << '\n';
}

void apply_overrides(Context& ctx) {
  const Options& o = ctx.opt;
  if (o.seed) ctx.cfg.synth.seed = ctx.cfg.train.seed = *o.seed;
  if (o.jobs) {
    if (*o.jobs < 1) throw ConfigError("--jobs must be >= 1");
    ctx.cfg.train.jobs = *o.jobs;
  }
  if (!o.head.empty()) ctx.cfg.train.head = head_from_string(o.head);
  if (o.no_contrastive) ctx.cfg.train.contrastive = false;
  if (o.no_pe_cross) ctx.cfg.train.pe_cross = false;
  if (o.no_pe_self) ctx.cfg.train.pe_self = false;
  if (o.proportion && !(*o.proportion >= 0.0 && *o.proportion <= 1.0)) {
    throw ConfigError("--proportion must lie in [0, 1]");
  }
  ctx.seed = ctx.command == "gen" ? ctx.cfg.synth.seed : ctx.cfg.train.seed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synchronization-aware active speaker detection lab", "avsync"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());
  Options opt;

  const auto common = [&opt](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "TOML or JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--out", opt.out, "output directory")->required();
    cmd->add_option("--seed", opt.seed, "seed overriding the config");
    cmd->add_option("--jobs", opt.jobs, "worker threads");
  };
  const auto flags = [&opt](CLI::App* cmd) {
    cmd->add_option("--head", opt.head, "sync|rothnet|product");
    cmd->add_flag("--no-contrastive", opt.no_contrastive, "disable the contrastive term");
    cmd->add_flag("--no-pe-cross", opt.no_pe_cross, "no positional encoding in cross-attention");
    cmd->add_flag("--no-pe-self", opt.no_pe_self, "no positional encoding in self-attention");
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  common(gen);
  auto* augment = app.add_subcommand("augment", "desynchronize a corpus (mismatch or misalign)");
  common(augment);
  augment->add_option("--in", opt.in, "input corpus")->required();
  augment->add_option("--kind", opt.kind, "mismatch|misalign")->required();
  augment->add_option("--proportion", opt.proportion, "share of samples replaced (default 1)");
  auto* train_cmd = app.add_subcommand("train", "train a model");
  common(train_cmd);
  train_cmd->add_option("--in", opt.in, "corpus")->required();
  flags(train_cmd);
  auto* eval = app.add_subcommand("eval", "mAP and per-video TPR on the test split");
  common(eval);
  eval->add_option("--in", opt.in, "corpus")->required();
  eval->add_option("--model", opt.model, "model checkpoint directory")->required();
  eval->add_option("--unsync", opt.unsync, "augmented corpus to curate from");
  eval->add_option("--kind", opt.kind, "augment the test split in-process: mismatch|misalign");
  eval->add_option("--proportion", opt.proportion, "share of unsynchronized samples");
  eval->add_flag("--silence", opt.silence, "zero the audio");
  eval->add_flag("--mask", opt.mask, "mask the bottom of every face");
  auto* sweep = app.add_subcommand("sweep", "mAP over the unsynchronized proportion");
  common(sweep);
  sweep->add_option("--in", opt.in, "corpus")->required();
  sweep->add_option("--model", opt.model, "model checkpoint directory")->required();
  sweep->add_option("--kind", opt.kind, "mismatch|misalign (default both)");
  auto* ablate = app.add_subcommand("ablate", "train and score the five ablation rows");
  common(ablate);
  ablate->add_option("--in", opt.in, "corpus")->required();
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every head's loss");
  common(gradcheck);
  auto* rank = app.add_subcommand("rank-dubbed", "per-video TPR ranking of dubbed videos");
  common(rank);
  rank->add_option("--in", opt.in, "corpus")->required();
  rank->add_option("--model", opt.model, "model checkpoint directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForVersion&) {
    out << tool_version() << '\n';
    return 0;
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::Success&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(err, ExitCode::kBadConfig, e.what());
  }

  Context ctx{app.get_subcommands().front()->get_name(), opt, {}, 0, out};
  try {
    if (!opt.config.empty()) ctx.cfg = load_run_config(opt.config);
    apply_overrides(ctx);
    ctx.cfg.train.validate();
    fs::create_directories(opt.out);
    const std::string& c = ctx.command;
    if (c == "gen") cmd_gen(ctx);
    else if (c == "augment") cmd_augment(ctx);
    else if (c == "train") cmd_train(ctx);
    else if (c == "eval") cmd_eval(ctx);
    else if (c == "sweep") cmd_sweep(ctx);
    else if (c == "ablate") cmd_ablate(ctx);
    else if (c == "gradcheck") cmd_gradcheck(ctx);
    else if (c == "rank-dubbed") cmd_rank_dubbed(ctx);
  } catch (const Error& e) {
    return fail(err, e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(err, ExitCode::kFailure, e.what());
  }
  return 0;
}

}  // namespace avsync
