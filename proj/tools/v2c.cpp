#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>

#include <fmt/core.h>

#include "v2c/checkpoint.hpp"
#include "v2c/config_json.hpp"
#include "v2c/error.hpp"
#include "v2c/evaluation.hpp"
#include "v2c/experiment.hpp"
#include "v2c/gradcheck_suite.hpp"
#include "v2c/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace v2c;

namespace {

constexpr int kExitError = 1;
constexpr int kExitCheckFailed = 2;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

class Manifest {
 public:
  Manifest(std::string subcommand, int argc, char** argv) : start_(std::chrono::steady_clock::now()) {
    doc_["subcommand"] = std::move(subcommand);
    doc_["argv"] = json::array();
    for (int i = 0; i < argc; ++i) doc_["argv"].push_back(argv[i]);
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::array();
    doc_["timings"] = json::object();
  }

  json& operator[](const char* key) { return doc_[key]; }
  void input(const fs::path& p) { doc_["inputs"][p.string()] = sha256_file(p); }
  void output(const fs::path& p) { doc_["outputs"].push_back(p.string()); }
  void phase(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    doc_["timings"][name + "_seconds"] = std::chrono::duration<double>(now - mark_).count();
    mark_ = now;
  }

  void write(const fs::path& path) {
    doc_["timings"]["total_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc_.dump(2) << '\n';
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::time_point mark_ = std::chrono::steady_clock::now();
};

std::uint64_t seed_override(std::uint64_t flag) {
  if (const char* env = std::getenv("V2C_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(std::string("V2C_SEED is not an unsigned integer: ") + env);
    }
  }
  return flag;
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) throw IoError("output directory " + dir.string() + " is not empty (use --force)");
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);
}

fs::path annotation_path(const fs::path& data) {
  return fs::is_directory(data) ? data / "annotations.tsv" : data;
}

struct Dataset {
  fs::path annotations;
  std::vector<LoadedClip> clips;
};

Dataset load_dataset(const fs::path& data, Manifest& manifest) {
  Dataset d{annotation_path(data), {}};
  std::vector<std::string> warnings;
  const auto records = load_annotations(d.annotations, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  d.clips = load_clips(d.annotations, records);
  manifest.input(d.annotations);
  for (const auto& r : records) manifest.input(resolve_feature_path(d.annotations, r));
  return d;
}

std::vector<LoadedClip> select_split(const Dataset& d, const ModelConfig& c, const std::string& which) {
  if (which == "all") return d.clips;
  auto split = split_clips(d.clips, c.split_ratio, c.split_seed);
  if (which == "train") return split.train;
  if (which == "test") return split.test;
  throw ValidationError("unknown split '" + which + "' (expected train, test or all)");
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  fs::path out;
  SynthSpec spec;
  std::vector<std::string> confuse;
  std::uint64_t seed = 1;
  bool force = false;
};

int run_synth(SynthOptions& o, Manifest& m) {
  for (const auto& pair : o.confuse) {
    const auto colon = pair.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == pair.size())
      throw ValidationError("--confuse expects a:b, got '" + pair + "'");
    o.spec.confusion.emplace_back(pair.substr(0, colon), pair.substr(colon + 1));
  }
  o.seed = seed_override(o.seed);
  o.spec.validate();
  prepare_output_dir(o.out, o.force);
  const auto data = synth_generate(o.spec, o.seed);
  m.phase("generate");
  write_dataset(o.out, data);
  m.phase("write");

  m["seeds"] = {{"seed", o.seed}};
  json confusion = json::array();
  for (const auto& [a, b] : o.spec.confusion) confusion.push_back({a, b});
  m["config"] = {{"clips", o.spec.num_clips},      {"hands", o.spec.hands},
                 {"actions", o.spec.actions},      {"objects", o.spec.objects},
                 {"feature_dim", o.spec.feature_dim}, {"min_frames", o.spec.min_frames},
                 {"max_frames", o.spec.max_frames}, {"noise", o.spec.noise_sigma},
                 {"confusion", confusion}};
  m.output(o.out / "annotations.tsv");
  m.output(o.out / "mean.v2cm");
  m.output(o.out / "features");
  m.write(o.out / "manifest.json");
  std::cout << "wrote " << data.clips.size() << " clips to " << o.out.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  fs::path data;
  fs::path out;
  fs::path resume;
  fs::path mean;
  std::string split = "train";
  ModelConfig config;
  std::string cell = "lstm";
  std::string feeding = "zeros";
  std::string cls_loss = "sigmoid";
  std::vector<std::size_t> filters;
  bool ednet = false;
  bool force = false;
  bool quiet = false;
};

int run_train(TrainOptions& o, Manifest& m) {
  const Dataset d = load_dataset(o.data, m);
  std::optional<Checkpoint> resumed;
  ModelConfig config = o.config;
  if (!o.filters.empty()) std::copy(o.filters.begin(), o.filters.end(), config.filters.begin());
  if (!o.resume.empty()) {
    m.input(o.resume);
    resumed = load_checkpoint(o.resume);
    const auto epochs = config.epochs;
    config = resumed->model.config;
    config.epochs = epochs;
  } else {
    config.cell = parse_cell_kind(o.cell);
    config.inference_feeding = parse_inference_feeding(o.feeding);
    config.cls_loss = parse_cls_loss(o.cls_loss);
    config.joint = !o.ednet;
    config.seed = seed_override(config.seed);
  }
  const auto train_clips = select_split(d, config, o.split);
  prepare_output_dir(o.out, o.force);
  m.phase("load");

  std::optional<V2CParams> fresh;
  V2CParams* model = nullptr;
  if (resumed) {
    model = &resumed->model;
    model->config.epochs = config.epochs;
  } else {
    Tensor mean;
    if (!o.mean.empty()) {
      mean = load_mean_frame(o.mean);
      m.input(o.mean);
    } else if (fs::is_directory(o.data) && fs::exists(o.data / "mean.v2cm")) {
      mean = load_mean_frame(o.data / "mean.v2cm");
      m.input(o.data / "mean.v2cm");
    } else {
      std::vector<Tensor> frames;
      for (const auto& c : train_clips) frames.push_back(c.features);
      mean = mean_feature(frames);
    }
    fresh.emplace(model_for_data(config, train_clips, std::move(mean)));
    model = &*fresh;
  }
  const auto examples = make_examples(train_clips, *model);
  if (resumed && resumed->train.epoch >= config.epochs)
    throw ValidationError(fmt::format("checkpoint is already at epoch {}; pass --epochs above it",
                                      resumed->train.epoch));

  Trainer trainer = resumed ? Trainer(*model, resumed->train) : Trainer(*model);
  const fs::path loss_path = o.out / "loss.tsv";
  std::ofstream loss_log(loss_path);
  if (!loss_log) throw IoError("cannot write " + loss_path.string());
  loss_log << "epoch\tloss\tcls_loss\ttrans_loss\n";
  trainer.train(examples, config.epochs, [&](const EpochStats& s) {
    loss_log << fmt::format("{}\t{}\t{}\t{}\n", s.epoch, s.loss, s.cls_loss, s.trans_loss);
    if (!o.quiet && (s.epoch % 10 == 0 || s.epoch == config.epochs))
      std::cerr << fmt::format("epoch {:4d}  loss {:.6f}  cls {:.6f}  trans {:.6f}\n", s.epoch, s.loss,
                               s.cls_loss, s.trans_loss);
  });
  loss_log.close();
  m.phase("train");
  save_checkpoint(o.out / "checkpoint.v2c", *model, trainer.state());

  m["config"] = to_json(model->config);
  m["seeds"] = {{"seed", model->config.seed}, {"split_seed", model->config.split_seed}};
  m["split"] = o.split;
  m["train_clips"] = train_clips.size();
  m["threads"] = kernels::threads();
  if (resumed) m["resumed_from_epoch"] = resumed->train.epoch;
  m.output(o.out / "checkpoint.v2c");
  m.output(loss_path);
  m.write(o.out / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  fs::path checkpoint;
  fs::path data;
  fs::path dump;
  fs::path manifest = "manifest.json";
  std::string split = "test";
};

int run_eval(EvalOptions& o, Manifest& m) {
  m.input(o.checkpoint);
  Checkpoint ck = load_checkpoint(o.checkpoint);
  const Dataset d = load_dataset(o.data, m);
  const auto clips = select_split(d, ck.model.config, o.split);
  if (clips.empty()) throw ValidationError("split '" + o.split + "' has no clips");
  for (const auto& c : clips)
    if (c.features.dim(1) != ck.model.config.feature_dim)
      throw DimensionError(fmt::format("clip {} has feature dimension {} but the checkpoint expects {}",
                                       c.record.clip_id, c.features.dim(1), ck.model.config.feature_dim));
  m.phase("load");
  const auto outcome = evaluate_all(ck.model, clips);
  m.phase("evaluate");
  std::cout << format_report(outcome.report);
  if (!o.dump.empty()) {
    write_eval_dump(o.dump, outcome.rows);
    m.output(o.dump);
  }
  const auto& r = outcome.report;
  m["config"] = to_json(ck.model.config);
  m["seeds"] = {{"seed", ck.model.config.seed}, {"split_seed", ck.model.config.split_seed}};
  m["split"] = o.split;
  m["report"] = {{"bleu", {r.bleu[0], r.bleu[1], r.bleu[2], r.bleu[3]}},
                 {"meteor", r.meteor},
                 {"rouge_l", r.rouge_l},
                 {"cider", r.cider},
                 {"action_success_translation", r.action_success_translation}};
  if (r.action_success_classification) m["report"]["action_success_classification"] = *r.action_success_classification;
  m.write(o.manifest);
  return 0;
}

// ---------------------------------------------------------------- decode

struct DecodeOptions {
  fs::path checkpoint;
  fs::path features;
  fs::path manifest = "manifest.json";
};

int run_decode(DecodeOptions& o, Manifest& m) {
  m.input(o.checkpoint);
  Checkpoint ck = load_checkpoint(o.checkpoint);
  const Tensor features = load_features(o.features);
  m.input(o.features);
  if (features.dim(1) != ck.model.config.feature_dim)
    throw DimensionError(fmt::format("{} has feature dimension {} but the checkpoint expects {}",
                                     o.features.string(), features.dim(1), ck.model.config.feature_dim));
  const auto result = infer_raw(features, ck.model);
  std::cout << result.command << '\t' << result.action << '\t' << (result.truncated ? "true" : "false") << '\n';
  m["config"] = to_json(ck.model.config);
  m["seeds"] = {{"seed", ck.model.config.seed}};
  m["result"] = {{"command", result.command}, {"action", result.action}, {"truncated", result.truncated}};
  m.write(o.manifest);
  return 0;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
  GradCheckOptions suite;
  fs::path manifest = "manifest.json";
};

int run_gradcheck(GradcheckOptions& o, Manifest& m) {
  o.suite.seed = seed_override(o.suite.seed);
  const auto entries = run_gradcheck_suite(o.suite);
  m.phase("check");
  bool ok = true;
  json results = json::array();
  for (const auto& e : entries) {
    ok = ok && e.passed;
    std::cout << fmt::format("{:<28} {:.3e}  < {:.0e}  {}\n", e.name, e.max_relative_error, e.threshold,
                             e.passed ? "ok" : "FAILED");
    results.push_back({{"name", e.name}, {"max_relative_error", e.max_relative_error},
                       {"threshold", e.threshold}, {"passed", e.passed}});
  }
  m["config"] = {{"eps", o.suite.epsilon},
                 {"primitive_threshold", o.suite.primitive_threshold},
                 {"model_threshold", o.suite.model_threshold},
                 {"seeds", o.suite.seeds},
                 {"inject_fault", o.suite.inject_fault}};
  m["seeds"] = {{"seed", o.suite.seed}};
  m["results"] = results;
  m["passed"] = ok;
  m.write(o.manifest);
  if (!ok) {
    std::cerr << "error: gradient check exceeded its threshold\n";
    return kExitCheckFailed;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::locale::global(std::locale::classic());
  CLI::App app{"Video-to-command translation with joint action classification"};
  app.require_subcommand(1);
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Worker threads for the numeric kernels")
      ->check(CLI::Range(std::size_t{1}, std::size_t{256}));

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--clips", so.spec.num_clips)->check(CLI::PositiveNumber);
  synth->add_option("--hands", so.spec.hands)->check(CLI::PositiveNumber);
  synth->add_option("--actions", so.spec.actions)->check(CLI::PositiveNumber);
  synth->add_option("--objects", so.spec.objects)->check(CLI::PositiveNumber);
  synth->add_option("--dim", so.spec.feature_dim, "Feature dimension")->check(CLI::PositiveNumber);
  synth->add_option("--min-frames", so.spec.min_frames)->check(CLI::PositiveNumber);
  synth->add_option("--max-frames", so.spec.max_frames)->check(CLI::PositiveNumber);
  synth->add_option("--noise", so.spec.noise_sigma, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
  synth->add_option("--confuse", so.confuse, "Look-alike action pair a:b (repeatable)");
  synth->add_option("--seed", so.seed);
  synth->add_flag("--force", so.force, "Replace a non-empty output directory");

  TrainOptions to;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--data", to.data, "Dataset directory or annotation file")->required();
  train->add_option("--out", to.out, "Output directory")->required();
  train->add_option("--split", to.split, "Clips to train on: train, test or all");
  train->add_option("--mean", to.mean, "Mean-frame file used for padding");
  train->add_option("--cell", to.cell)->check(CLI::IsMember({"lstm", "gru"}));
  train->add_option("--hidden", to.config.hidden)->check(CLI::PositiveNumber);
  train->add_option("--frames", to.config.frames)->check(CLI::PositiveNumber);
  train->add_option("--epochs", to.config.epochs)->check(CLI::PositiveNumber);
  train->add_option("--batch", to.config.batch_size)->check(CLI::PositiveNumber);
  train->add_option("--lr", to.config.lr)->check(CLI::PositiveNumber);
  train->add_option("--seed", to.config.seed);
  train->add_option("--split-ratio", to.config.split_ratio)->check(CLI::Range(0.0, 1.0));
  train->add_option("--split-seed", to.config.split_seed);
  train->add_option("--feeding", to.feeding)->check(CLI::IsMember({"zeros", "autoregressive"}));
  train->add_option("--cls-loss", to.cls_loss)->check(CLI::IsMember({"sigmoid", "softmax"}));
  train->add_option("--cls-weight", to.config.cls_weight)->check(CLI::NonNegativeNumber);
  train->add_option("--fc-hidden", to.config.fc_hidden)->check(CLI::PositiveNumber);
  train->add_option("--filters", to.filters, "Three convolution widths")->expected(3)->check(CLI::PositiveNumber);
  train->add_flag("--ednet", to.ednet, "Translation branch only (baseline)");
  train->add_option("--resume", to.resume, "Continue from a checkpoint");
  train->add_flag("--force", to.force, "Replace a non-empty output directory");
  train->add_flag("--quiet", to.quiet);

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  eval->add_option("--checkpoint", eo.checkpoint)->required();
  eval->add_option("--data", eo.data)->required();
  eval->add_option("--split", eo.split, "train, test or all");
  eval->add_option("--dump", eo.dump, "Per-clip TSV output");
  eval->add_option("--manifest", eo.manifest);

  DecodeOptions dopt;
  auto* decode = app.add_subcommand("decode", "Translate one feature file");
  decode->add_option("--checkpoint", dopt.checkpoint)->required();
  decode->add_option("--features", dopt.features)->required();
  decode->add_option("--manifest", dopt.manifest);

  GradcheckOptions go;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--eps", go.suite.epsilon)->check(CLI::PositiveNumber);
  gradcheck->add_option("--seeds", go.suite.seeds)->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", go.suite.seed);
  gradcheck->add_flag("--inject-fault", go.suite.inject_fault, "Include an op with a wrong gradient");
  gradcheck->add_option("--manifest", go.manifest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }

  try {
    kernels::set_threads(threads);
    const std::string name = app.get_subcommands().front()->get_name();
    Manifest manifest(name, argc, argv);
    if (name == "synth") return run_synth(so, manifest);
    if (name == "train") return run_train(to, manifest);
    if (name == "eval") return run_eval(eo, manifest);
    if (name == "decode") return run_decode(dopt, manifest);
    return run_gradcheck(go, manifest);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}
