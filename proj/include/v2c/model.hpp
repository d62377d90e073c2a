#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "v2c/adam.hpp"
#include "v2c/graph.hpp"
#include "v2c/rng.hpp"
#include "v2c/tcn.hpp"
#include "v2c/translator.hpp"
#include "v2c/vocabulary.hpp"

namespace v2c {

enum class InitialStateKind { zero, uniform };

std::string to_string(InitialStateKind k);
InitialStateKind parse_initial_state(const std::string& text);
std::string to_string(ClsLossKind k);
ClsLossKind parse_cls_loss(const std::string& text);

struct ModelConfig {
  std::size_t frames = 30;
  std::size_t hidden = 64;
  CellKind cell = CellKind::lstm;
  std::size_t feature_dim = 0;
  std::size_t classes = 0;
  bool joint = true;  // false: translation branch only (EDNet baseline)
  std::size_t epochs = 300;
  std::size_t batch_size = 16;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  InferenceFeeding inference_feeding = InferenceFeeding::zeros;
  ClsLossKind cls_loss = ClsLossKind::sigmoid;
  double cls_weight = 1.0;
  std::array<std::size_t, 3> filters{128, 64, 32};
  std::size_t fc_hidden = 256;
  InitialStateKind initial_state = InitialStateKind::zero;
  double split_ratio = 0.7;
  std::uint64_t split_seed = 1;

  void validate() const;
  TcnConfig tcn_config() const;
  bool operator==(const ModelConfig&) const = default;
};

// Both branches plus everything inference needs: vocabulary, class names and the padding frame.
struct V2CParams {
  ModelConfig config;
  Vocabulary vocab;
  std::vector<std::string> classes;
  Tensor mean_frame;
  TcnParams tcn;
  TranslatorParams translator;

  std::vector<Parameter*> parameters();
  // Parameters reachable from the training loss; the TCN is excluded in EDNet mode.
  std::vector<Parameter*> trainable();
  std::size_t class_index(const std::string& action) const;
};

// Allocates every tensor with the right shape; values are zero.
V2CParams allocate_model(const ModelConfig& config, Vocabulary vocab, std::vector<std::string> classes,
                         Tensor mean_frame);
// allocate_model, then seeded U[-0.1, 0.1] initialisation. Each branch draws
// from its own stream of config.seed, so the translator starts identically in
// joint and EDNet mode.
V2CParams make_model(const ModelConfig& config, Vocabulary vocab, std::vector<std::string> classes,
                     Tensor mean_frame);

// One training clip: padded features, encoded command, action label.
struct Example {
  std::string clip_id;
  Tensor features;  // [frames x feature_dim]
  WordSequence words;
  ActionLabel label;
};

Example make_example(const std::string& clip_id, const Tensor& raw_features, const std::string& command,
                     const std::string& action, const V2CParams& model);

struct LossTerms {
  Var total;
  Var cls;
  Var trans;
};

// Per-clip loss terms for one example.
LossTerms example_loss(Graph& g, const Example& ex, V2CParams& model);
// L = mean over the batch of (cls_weight * L_cls + L_trans); L_cls is zero in EDNet mode.
LossTerms forward_loss(Graph& g, std::span<const Example> batch, V2CParams& model);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double cls_loss = 0.0;
  double trans_loss = 0.0;
};

// Optimizer and shuffling state needed to continue training exactly.
struct TrainState {
  std::size_t epoch = 0;
  std::vector<AdamState> adam;
  std::string rng_state;
};

class Trainer {
 public:
  explicit Trainer(V2CParams& model);
  Trainer(V2CParams& model, const TrainState& resume);

  EpochStats run_epoch(std::span<const Example> data);
  // Runs epochs until `last_epoch` (inclusive, 1-based); returns their stats.
  std::vector<EpochStats> train(std::span<const Example> data, std::size_t last_epoch,
                                const std::function<void(const EpochStats&)>& on_epoch = {});

  TrainState state() const;
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  V2CParams& model_;
  Adam adam_;
  Rng rng_;
  std::size_t epoch_ = 0;
};

struct Inference {
  std::string command;
  bool truncated = false;
  std::string action;  // classification branch in joint mode, command verb in EDNet mode
  std::string action_from_translation;
  std::optional<std::string> action_from_classification;
  std::vector<std::string> words;  // emitted words, EOC included when reached
};

// `features` must already be padded to [frames x feature_dim].
Inference infer(const Tensor& features, V2CParams& model);
// Pads raw [T x d] features with the model's mean frame, then infers.
Inference infer_raw(const Tensor& raw_features, V2CParams& model);

}  // namespace v2c
