#include "v2c/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "v2c/data.hpp"
#include "v2c/error.hpp"
#include "v2c/ops.hpp"

namespace v2c {

namespace {

enum Stream : std::uint64_t { kTcnInit = 1, kTranslatorInit = 2, kShuffle = 3, kInitialState = 4 };

}  // namespace

std::string to_string(InitialStateKind k) { return k == InitialStateKind::zero ? "zero" : "uniform"; }

InitialStateKind parse_initial_state(const std::string& text) {
  if (text == "zero") return InitialStateKind::zero;
  if (text == "uniform") return InitialStateKind::uniform;
  throw ValidationError("unknown initial state '" + text + "' (expected zero or uniform)");
}

std::string to_string(ClsLossKind k) { return k == ClsLossKind::sigmoid ? "sigmoid" : "softmax"; }

ClsLossKind parse_cls_loss(const std::string& text) {
  if (text == "sigmoid") return ClsLossKind::sigmoid;
  if (text == "softmax") return ClsLossKind::softmax;
  throw ValidationError("unknown classification loss '" + text + "' (expected sigmoid or softmax)");
}

void ModelConfig::validate() const {
  if (frames == 0) throw ValidationError("config: frames must be >= 1");
  if (batch_size == 0) throw ValidationError("config: batch size must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("config: learning rate must be > 0");
  if (hidden == 0) throw ValidationError("config: hidden size must be >= 1");
  if (feature_dim == 0) throw ValidationError("config: feature dimension must be >= 1");
  if (classes == 0) throw ValidationError("config: at least one action class is required");
  if (!(cls_weight >= 0.0)) throw ValidationError("config: classification weight must be >= 0");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ValidationError("config: split ratio must lie in (0, 1)");
}

TcnConfig ModelConfig::tcn_config() const {
  TcnConfig c;
  c.frames = frames;
  c.feature_dim = feature_dim;
  c.classes = classes;
  c.filters = filters;
  c.fc_hidden = fc_hidden;
  return c;
}

std::vector<Parameter*> V2CParams::parameters() {
  auto out = tcn.parameters();
  for (auto* p : translator.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> V2CParams::trainable() {
  return config.joint ? parameters() : translator.parameters();
}

std::size_t V2CParams::class_index(const std::string& action) const {
  auto it = std::lower_bound(classes.begin(), classes.end(), action);
  if (it == classes.end() || *it != action) throw ValidationError("unknown action class '" + action + "'");
  return static_cast<std::size_t>(it - classes.begin());
}

V2CParams allocate_model(const ModelConfig& config, Vocabulary vocab, std::vector<std::string> classes,
                         Tensor mean_frame) {
  ModelConfig cfg = config;
  cfg.classes = classes.size();
  cfg.validate();
  if (!std::is_sorted(classes.begin(), classes.end()) ||
      std::adjacent_find(classes.begin(), classes.end()) != classes.end()) {
    throw ValidationError("action classes must be sorted and distinct");
  }
  if (mean_frame.shape() != Shape{cfg.feature_dim}) {
    throw DimensionError("mean frame has shape " + shape_string(mean_frame.shape()) + ", expected [" +
                         std::to_string(cfg.feature_dim) + "]");
  }
  V2CParams m;
  m.config = cfg;
  m.tcn = TcnParams(cfg.tcn_config());
  m.translator = TranslatorParams(cfg.cell, cfg.feature_dim, cfg.hidden, vocab.size());
  m.vocab = std::move(vocab);
  m.classes = std::move(classes);
  m.mean_frame = std::move(mean_frame);
  return m;
}

V2CParams make_model(const ModelConfig& config, Vocabulary vocab, std::vector<std::string> classes,
                     Tensor mean_frame) {
  V2CParams m = allocate_model(config, std::move(vocab), std::move(classes), std::move(mean_frame));
  Rng tcn_rng(derive_seed(m.config.seed, kTcnInit));
  init_uniform(m.tcn.parameters(), tcn_rng);
  Rng translator_rng(derive_seed(m.config.seed, kTranslatorInit));
  init_uniform(m.translator.parameters(), translator_rng);
  if (m.config.initial_state == InitialStateKind::uniform) {
    Rng state_rng(derive_seed(m.config.seed, kInitialState));
    auto& t = m.translator;
    for (Tensor* s : {&t.encoder_h0, &t.encoder_c0, &t.decoder_h0, &t.decoder_c0}) {
      for (auto& v : s->values()) v = state_rng.uniform(-0.1, 0.1);
    }
  }
  return m;
}

Example make_example(const std::string& clip_id, const Tensor& raw_features, const std::string& command,
                     const std::string& action, const V2CParams& model) {
  const auto& c = model.config;
  if (raw_features.rank() != 2 || raw_features.dim(1) != c.feature_dim) {
    throw DimensionError(clip_id + ": features " + shape_string(raw_features.shape()) + " do not match model width " +
                         std::to_string(c.feature_dim));
  }
  return Example{clip_id, pad_features(raw_features, c.frames, model.mean_frame),
                 encode_command(command, model.vocab, c.frames),
                 ActionLabel::make(model.class_index(action), model.classes.size())};
}

LossTerms example_loss(Graph& g, const Example& ex, V2CParams& model) {
  const Var X = g.constant(ex.features);
  const Var H_e = encode(g, X, model.translator);
  const Var logits = decode_train(g, H_e, ex.words, model.vocab.empty_index(), model.translator);
  const Var trans = trans_loss(g, logits, ex.words);
  if (!model.config.joint) return LossTerms{trans, g.constant(Tensor({1})), trans};
  const Var cls = cls_loss(g, tcn_forward(g, X, model.tcn), ex.label, model.config.cls_loss);
  const Var weighted = model.config.cls_weight == 1.0 ? cls : ops::scale(g, cls, model.config.cls_weight);
  return LossTerms{ops::add(g, weighted, trans), cls, trans};
}

LossTerms forward_loss(Graph& g, std::span<const Example> batch, V2CParams& model) {
  if (batch.empty()) throw ValidationError("forward_loss: empty batch");
  std::vector<Var> total, cls, trans;
  for (const auto& ex : batch) {
    const LossTerms t = example_loss(g, ex, model);
    total.push_back(t.total);
    cls.push_back(t.cls);
    trans.push_back(t.trans);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  return LossTerms{ops::scale(g, ops::add_n(g, total), inv), ops::scale(g, ops::add_n(g, cls), inv),
                   ops::scale(g, ops::add_n(g, trans), inv)};
}

Trainer::Trainer(V2CParams& model)
    : model_(model),
      adam_(model.trainable(), AdamConfig{model.config.lr}),
      rng_(derive_seed(model.config.seed, kShuffle)) {}

Trainer::Trainer(V2CParams& model, const TrainState& resume) : Trainer(model) {
  auto& states = adam_.states();
  if (resume.adam.size() != states.size()) {
    throw ValidationError("resume: optimizer state covers " + std::to_string(resume.adam.size()) +
                          " parameters, model has " + std::to_string(states.size()));
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (resume.adam[i].first_moment.shape() != states[i].first_moment.shape()) {
      throw DimensionError("resume: optimizer state shape mismatch for '" + adam_.params()[i]->name + "'");
    }
    states[i] = resume.adam[i];
  }
  if (!resume.rng_state.empty()) rng_.restore(resume.rng_state);
  epoch_ = resume.epoch;
}

EpochStats Trainer::run_epoch(std::span<const Example> data) {
  if (data.empty()) throw ValidationError("train: empty dataset");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng_.shuffle(order);

  EpochStats stats;
  stats.epoch = ++epoch_;
  const std::size_t B = model_.config.batch_size;
  for (std::size_t start = 0; start < order.size(); start += B) {
    const std::size_t end = std::min(order.size(), start + B);
    const double inv = 1.0 / static_cast<double>(end - start);
    adam_.zero_grad();
    for (std::size_t k = start; k < end; ++k) {
      Graph g;
      const LossTerms t = example_loss(g, data[order[k]], model_);
      stats.loss += g.scalar(t.total);
      stats.cls_loss += g.scalar(t.cls);
      stats.trans_loss += g.scalar(t.trans);
      g.backward(ops::scale(g, t.total, inv));
    }
    adam_.step();
  }
  const double n = static_cast<double>(data.size());
  stats.loss /= n;
  stats.cls_loss /= n;
  stats.trans_loss /= n;
  return stats;
}

std::vector<EpochStats> Trainer::train(std::span<const Example> data, std::size_t last_epoch,
                                       const std::function<void(const EpochStats&)>& on_epoch) {
  std::vector<EpochStats> history;
  while (epoch_ < last_epoch) {
    history.push_back(run_epoch(data));
    if (!std::isfinite(history.back().loss)) throw NumericError("training loss became non-finite");
    if (on_epoch) on_epoch(history.back());
  }
  return history;
}

TrainState Trainer::state() const { return TrainState{epoch_, adam_.states(), rng_.state()}; }

Inference infer(const Tensor& features, V2CParams& model) {
  const auto& c = model.config;
  if (features.shape() != Shape{c.frames, c.feature_dim}) {
    throw DimensionError("infer: features " + shape_string(features.shape()) + " do not match model input [" +
                         std::to_string(c.frames) + "x" + std::to_string(c.feature_dim) + "]");
  }
  Graph g;
  const Var X = g.constant(features);
  const Var H_e = encode(g, X, model.translator);
  const GreedyDecode decoded = decode_greedy(g, H_e, model.translator, model.vocab, c.inference_feeding);

  Inference out;
  for (auto idx : decoded.indices) out.words.push_back(model.vocab.word(idx));
  const AssembledCommand cmd = assemble_command(out.words);
  out.command = cmd.text;
  out.truncated = cmd.truncated;
  out.action_from_translation = extract_action(out.command);
  if (c.joint) {
    const std::size_t cls = classify(g.value(tcn_forward(g, X, model.tcn)).values());
    out.action_from_classification = model.classes[cls];
    out.action = *out.action_from_classification;
  } else {
    out.action = out.action_from_translation;
  }
  return out;
}

Inference infer_raw(const Tensor& raw_features, V2CParams& model) {
  if (raw_features.rank() != 2 || raw_features.dim(1) != model.config.feature_dim) {
    throw DimensionError("features " + shape_string(raw_features.shape()) + " do not match model width " +
                         std::to_string(model.config.feature_dim));
  }
  return infer(pad_features(raw_features, model.config.frames, model.mean_frame), model);
}

}  // namespace v2c
