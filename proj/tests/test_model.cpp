#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "v2c/data.hpp"
#include "v2c/error.hpp"
#include "v2c/model.hpp"
#include "v2c/ops.hpp"
#include "v2c/rng.hpp"

using namespace v2c;

namespace {

ModelConfig small_config(bool joint, CellKind cell = CellKind::lstm) {
  ModelConfig c;
  c.frames = 8;
  c.hidden = 6;
  c.cell = cell;
  c.feature_dim = 4;
  c.joint = joint;
  c.filters = {3, 3, 2};
  c.fc_hidden = 5;
  c.seed = 7;
  return c;
}

Tensor random_frames(std::size_t T, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Tensor X({T, d});
  for (auto& v : X.values()) v = rng.uniform(-1, 1);
  return X;
}

const std::vector<std::string> kCommands{"righthand cut apple", "lefthand pour milk bowl"};
const std::vector<std::string> kActions{"cut", "pour"};

V2CParams small_model(const ModelConfig& config) {
  return make_model(config, Vocabulary::build(kCommands), {"cut", "pour"}, Tensor({config.feature_dim}, 0.1));
}

std::vector<Example> small_batch(const V2CParams& model) {
  return {make_example("a", random_frames(6, 4, 1), kCommands[0], kActions[0], model),
          make_example("b", random_frames(11, 4, 2), kCommands[1], kActions[1], model)};
}

double grad_norm(std::vector<Parameter*> params) {
  double s = 0.0;
  for (auto* p : params)
    for (double v : p->grad.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST(ModelLoss, EdnetTotalIsTranslationLoss) {
  auto model = small_model(small_config(false));
  const auto batch = small_batch(model);
  Graph g;
  const auto t = forward_loss(g, batch, model);
  EXPECT_EQ(g.scalar(t.total), g.scalar(t.trans));
  EXPECT_EQ(g.scalar(t.cls), 0.0);
}

TEST(ModelLoss, JointTotalIsMeanOfBranchSums) {
  auto model = small_model(small_config(true));
  const auto batch = small_batch(model);
  double expected = 0.0;
  for (const auto& ex : batch) {
    Graph g;
    const Var X = g.constant(ex.features);
    const double cls = g.scalar(cls_loss(g, tcn_forward(g, X, model.tcn), ex.label));
    const Var logits = decode_train(g, encode(g, X, model.translator), ex.words, model.vocab.empty_index(),
                                    model.translator);
    expected += cls + g.scalar(trans_loss(g, logits, ex.words));
  }
  expected /= 2.0;
  Graph g;
  const auto t = forward_loss(g, batch, model);
  EXPECT_NEAR(g.scalar(t.total), expected, 1e-12);
  EXPECT_NEAR(g.scalar(t.total), g.scalar(t.cls) + g.scalar(t.trans), 1e-12);
}

TEST(ModelLoss, EmptyBatchRejected) {
  auto model = small_model(small_config(true));
  Graph g;
  EXPECT_THROW(forward_loss(g, std::span<const Example>{}, model), ValidationError);
}

TEST(ModelGradients, TranslatorGradientsMatchBetweenJointAndEdnet) {
  for (auto cell : {CellKind::lstm, CellKind::gru}) {
    auto joint = small_model(small_config(true, cell));
    auto ednet = small_model(small_config(false, cell));
    const auto jp = joint.translator.parameters();
    const auto ep = ednet.translator.parameters();
    ASSERT_EQ(jp.size(), ep.size());
    for (std::size_t i = 0; i < jp.size(); ++i) ASSERT_TRUE(bit_identical(jp[i]->value, ep[i]->value));

    for (auto* m : {&joint, &ednet}) {
      for (auto* p : m->parameters()) p->zero_grad();
      const auto batch = small_batch(*m);
      Graph g;
      g.backward(forward_loss(g, batch, *m).total);
    }
    for (std::size_t i = 0; i < jp.size(); ++i) {
      EXPECT_TRUE(bit_identical(jp[i]->grad, ep[i]->grad)) << jp[i]->name;
    }
    EXPECT_GT(grad_norm(joint.tcn.parameters()), 0.0);
    for (auto* p : joint.tcn.parameters()) {
      const bool any = std::any_of(p->grad.values().begin(), p->grad.values().end(), [](double v) { return v != 0.0; });
      EXPECT_TRUE(any) << p->name;
    }
    EXPECT_EQ(grad_norm(ednet.tcn.parameters()), 0.0);
  }
}

TEST(ModelGradients, EdnetTrainsOnlyTranslator) {
  auto ednet = small_model(small_config(false));
  EXPECT_EQ(ednet.trainable().size(), ednet.translator.parameters().size());
  auto joint = small_model(small_config(true));
  EXPECT_EQ(joint.trainable().size(), joint.parameters().size());
}

TEST(ModelLoss, SaturatedBranchesGiveNearZeroLoss) {
  const std::string command = "righthand cut apple";
  ModelConfig c = small_config(true);
  c.hidden = 8;
  auto model = make_model(c, Vocabulary::build(std::vector<std::string>{command}), {"cut", "pour"},
                          Tensor({c.feature_dim}, 0.0));
  for (auto* p : model.parameters()) p->value.fill(0.0);

  // Classifier: constant logits, +40 on the target class.
  model.tcn.fc1_b.value[model.class_index("cut")] = 40.0;
  model.tcn.fc1_b.value[model.class_index("pour")] = -40.0;

  // Decoder: the hidden state is an indicator of the previous word, and the
  // projection maps each previous word onto its successor.
  auto& dec = std::get<LstmParams>(model.translator.decoder);
  dec.b_i.value.fill(40.0);
  dec.b_o.value.fill(40.0);
  dec.b_f.value.fill(-40.0);
  const auto& vocab = model.vocab;
  ASSERT_LE(vocab.size(), c.hidden);
  for (std::size_t w = 0; w < vocab.size(); ++w) dec.W_xg.value.at(w, w) = 3.0;
  std::vector<std::size_t> ids{vocab.empty_index(), vocab.index("righthand"), vocab.index("cut"),
                               vocab.index("apple"), vocab.eoc_index()};
  for (std::size_t k = 0; k + 1 < ids.size(); ++k) model.translator.proj_W.value.at(ids[k + 1], ids[k]) = 60.0;

  const std::vector<Example> batch{make_example("s", random_frames(5, c.feature_dim, 3), command, "cut", model)};
  Graph g;
  const auto t = forward_loss(g, batch, model);
  EXPECT_LT(g.scalar(t.total), 1e-7);
  EXPECT_LT(g.scalar(t.cls), 1e-8);
  EXPECT_LT(g.scalar(t.trans), 1e-8);
}

namespace {

struct OverfitRun {
  V2CParams model;
  std::vector<EpochStats> history;
  Tensor raw;
};

OverfitRun overfit_one_clip(const std::string& command, const std::string& action, bool joint, std::size_t epochs,
                            std::size_t hidden, std::size_t frames) {
  ModelConfig c;
  c.frames = frames;
  c.hidden = hidden;
  c.feature_dim = 32;
  c.joint = joint;
  c.lr = 1e-3;
  c.seed = 3;
  c.filters = {16, 8, 8};
  c.fc_hidden = 16;
  OverfitRun run{make_model(c, Vocabulary::build(std::vector<std::string>{command}), {action},
                            Tensor({c.feature_dim}, 0.0)),
                 {},
                 random_frames(40, c.feature_dim, 11)};
  const std::vector<Example> data{make_example("clip", run.raw, command, action, run.model)};
  Trainer trainer(run.model);
  run.history = trainer.train(data, epochs);
  return run;
}

}  // namespace

TEST(ModelTraining, SingleClipOverfitsAndDecodes) {
  const std::string command = "righthand cut apple";
  auto run = overfit_one_clip(command, "cut", true, 500, 64, 30);
  ASSERT_EQ(run.history.size(), 500u);
  EXPECT_LT(run.history.back().loss, 0.01);
  const auto out = infer_raw(run.raw, run.model);
  EXPECT_EQ(out.command, command);
  EXPECT_FALSE(out.truncated);
  EXPECT_EQ(out.action, "cut");
  EXPECT_EQ(out.action_from_translation, "cut");

  const auto& h = run.history;
  for (std::size_t e = 0; e + 50 < h.size(); ++e) {
    EXPECT_LE(h[e + 50].loss, h[e].loss) << "window starting at epoch " << h[e].epoch;
  }
  for (std::size_t e = 1; e < h.size(); ++e) {
    EXPECT_LE(h[e].loss, h[e - 1].loss * 1.05) << "epoch " << h[e].epoch;
  }
}

TEST(ModelTraining, EdnetActionComesFromGeneratedVerb) {
  const std::string command = "lefthand cut bread";
  auto run = overfit_one_clip(command, "cut", false, 300, 16, 10);
  const auto out = infer_raw(run.raw, run.model);
  EXPECT_EQ(out.command, command);
  EXPECT_EQ(out.action, "cut");
  EXPECT_FALSE(out.action_from_classification.has_value());
}

TEST(ModelTraining, SameSeedSameTrajectory) {
  auto train = [] {
    auto model = small_model(small_config(true));
    model.config.batch_size = 1;
    const auto data = small_batch(model);
    Trainer trainer(model);
    auto history = trainer.train(data, 5);
    return std::make_pair(std::move(model), std::move(history));
  };
  auto [m1, h1] = train();
  auto [m2, h2] = train();
  ASSERT_EQ(h1.size(), h2.size());
  for (std::size_t i = 0; i < h1.size(); ++i) EXPECT_EQ(h1[i].loss, h2[i].loss);
  const auto p1 = m1.parameters();
  const auto p2 = m2.parameters();
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_TRUE(bit_identical(p1[i]->value, p2[i]->value)) << p1[i]->name;
}

TEST(ModelTraining, EpochCounterAndEmptyData) {
  auto model = small_model(small_config(true));
  const auto data = small_batch(model);
  Trainer trainer(model);
  const auto h = trainer.train(data, 3);
  ASSERT_EQ(h.size(), 3u);
  EXPECT_EQ(h.front().epoch, 1u);
  EXPECT_EQ(h.back().epoch, 3u);
  EXPECT_TRUE(trainer.train(data, 2).empty());
  EXPECT_THROW(trainer.run_epoch(std::span<const Example>{}), ValidationError);
}

TEST(ModelInference, RepeatedCallsAgree) {
  auto model = small_model(small_config(true));
  const auto X = random_frames(9, 4, 5);
  const auto a = infer_raw(X, model);
  const auto b = infer_raw(X, model);
  EXPECT_EQ(a.words, b.words);
  EXPECT_EQ(a.command, b.command);
  EXPECT_EQ(a.action, b.action);
  ASSERT_TRUE(a.action_from_classification.has_value());
  EXPECT_EQ(a.action, *a.action_from_classification);
}

TEST(ModelInference, RejectsWrongWidth) {
  auto model = small_model(small_config(true));
  EXPECT_THROW(infer_raw(random_frames(5, 3, 1), model), DimensionError);
  EXPECT_THROW(infer(random_frames(5, 4, 1), model), DimensionError);
}

TEST(ModelConfigTest, ValidationAndParsing) {
  ModelConfig c = small_config(true);
  c.classes = 2;
  EXPECT_NO_THROW(c.validate());
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_config(true);
  c.classes = 2;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_EQ(parse_cls_loss("softmax"), ClsLossKind::softmax);
  EXPECT_THROW(parse_cls_loss("hinge"), ValidationError);
  EXPECT_EQ(parse_initial_state(to_string(InitialStateKind::uniform)), InitialStateKind::uniform);
  EXPECT_THROW(make_model(small_config(true), Vocabulary::build(kCommands), {"pour", "cut"}, Tensor({4})),
               ValidationError);
  EXPECT_THROW(make_model(small_config(true), Vocabulary::build(kCommands), {"cut"}, Tensor({5})), DimensionError);
}

TEST(ModelConfigTest, DefaultsMatchDocumentedValues) {
  const ModelConfig c;
  EXPECT_EQ(c.frames, 30u);
  EXPECT_EQ(c.batch_size, 16u);
  EXPECT_EQ(c.lr, 1e-4);
  EXPECT_EQ(c.epochs, 300u);
  EXPECT_EQ(c.cell, CellKind::lstm);
  EXPECT_TRUE(c.joint);
}
