#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "v2c/adam.hpp"
#include "v2c/data.hpp"
#include "v2c/error.hpp"
#include "v2c/gradcheck.hpp"
#include "v2c/ops.hpp"
#include "v2c/recurrent.hpp"
#include "v2c/rng.hpp"
#include "v2c/tcn.hpp"

using namespace v2c;

namespace {

TcnConfig micro_config() {
  TcnConfig c;
  c.frames = 4;
  c.feature_dim = 2;
  c.classes = 2;
  c.filters = {2, 2, 2};
  c.fc_hidden = 3;
  return c;
}

using Mat = std::vector<std::vector<double>>;

Mat conv_oracle(const Mat& X, const Parameter& K, const Parameter& b) {
  const std::size_t T = X.size(), w = K.value.dim(0), din = K.value.dim(1), dout = K.value.dim(2);
  Mat Y(T, std::vector<double>(dout));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t o = 0; o < dout; ++o) {
      double acc = b.value[o];
      for (std::size_t j = 0; j < w; ++j) {
        const long src = static_cast<long>(t + j) - static_cast<long>(w / 2);
        if (src < 0 || src >= static_cast<long>(T)) continue;
        for (std::size_t i = 0; i < din; ++i) acc += X[src][i] * K.value.at(j, i, o);
      }
      Y[t][o] = acc;
    }
  return Y;
}

Mat relu_oracle(Mat X) {
  for (auto& r : X)
    for (auto& v : r) v = std::max(0.0, v);
  return X;
}

Mat pool_oracle(const Mat& X) {
  Mat Y;
  for (std::size_t t = 0; t < X.size(); t += 2) {
    auto row = X[t];
    if (t + 1 < X.size())
      for (std::size_t k = 0; k < row.size(); ++k) row[k] = std::max(row[k], X[t + 1][k]);
    Y.push_back(row);
  }
  return Y;
}

std::vector<double> dense_oracle(const std::vector<double>& x, const Parameter& W, const Parameter& b) {
  std::vector<double> y(b.value.size());
  for (std::size_t o = 0; o < y.size(); ++o) {
    y[o] = b.value[o];
    for (std::size_t i = 0; i < x.size(); ++i) y[o] += W.value.at(o, i) * x[i];
  }
  return y;
}

std::vector<std::size_t> train_standalone_tcn(const SynthDataset& data, const std::vector<std::string>& classes,
                                              std::size_t epochs, double lr, std::uint64_t seed) {
  TcnConfig cfg;
  cfg.frames = 30;
  cfg.feature_dim = data.mean_frame.size();
  cfg.classes = classes.size();
  TcnParams p(cfg);
  Rng rng(seed);
  init_uniform(p.parameters(), rng, 0.1);
  std::vector<Tensor> inputs;
  std::vector<ActionLabel> labels;
  for (const auto& c : data.clips) {
    inputs.push_back(pad_features(c.features, 30, data.mean_frame));
    const auto idx = std::find(classes.begin(), classes.end(), c.record.action) - classes.begin();
    labels.push_back(ActionLabel::make(static_cast<std::size_t>(idx), classes.size()));
  }
  Adam opt(p.parameters(), AdamConfig{lr});
  std::vector<std::size_t> order(inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += 16) {
      opt.zero_grad();
      const std::size_t end = std::min(order.size(), start + 16);
      for (std::size_t k = start; k < end; ++k) {
        Graph g;
        const Var loss = cls_loss(g, tcn_forward(g, g.constant(inputs[order[k]]), p), labels[order[k]]);
        g.backward(ops::scale(g, loss, 1.0 / static_cast<double>(end - start)));
      }
      opt.step();
    }
  }
  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Graph g;
    if (classify(g.value(tcn_forward(g, g.constant(inputs[i]), p)).values()) == labels[i].class_index)
      correct.push_back(i);
  }
  return correct;
}

}  // namespace

TEST(Tcn, PooledFramesFollowCeilDivision) {
  TcnConfig c;
  EXPECT_EQ(c.pooled_frames(), 8u);
  c.frames = 4;
  EXPECT_EQ(c.pooled_frames(), 1u);
  c.frames = 5;
  EXPECT_EQ(c.pooled_frames(), 2u);
}

TEST(Tcn, ZeroParametersGiveZeroLogits) {
  TcnConfig c = micro_config();
  TcnParams p(c);
  Graph g;
  EXPECT_EQ(g.value(tcn_forward(g, g.constant(Tensor({4, 2}, 0.7)), p)), Tensor({2}));
}

TEST(Tcn, MicroForwardMatchesLayerByLayerOracle) {
  TcnParams p(micro_config());
  Rng rng(31);
  init_uniform(p.parameters(), rng, 0.9);
  Tensor X({4, 2});
  Mat Xm(4, std::vector<double>(2));
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t i = 0; i < 2; ++i) Xm[t][i] = X.at(t, i) = rng.uniform(-1, 1);

  Mat h = pool_oracle(relu_oracle(conv_oracle(Xm, p.conv0.kernel, p.conv0.bias)));
  h = pool_oracle(relu_oracle(conv_oracle(h, p.conv1.kernel, p.conv1.bias)));
  h = relu_oracle(conv_oracle(h, p.conv2.kernel, p.conv2.bias));
  std::vector<double> flat;
  for (const auto& r : h) flat.insert(flat.end(), r.begin(), r.end());
  auto f0 = dense_oracle(flat, p.fc0_W, p.fc0_b);
  for (auto& v : f0) v = std::max(0.0, v);
  const auto logits = dense_oracle(f0, p.fc1_W, p.fc1_b);

  Graph g;
  const Tensor got = g.value(tcn_forward(g, g.constant(X), p));
  ASSERT_EQ(got.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(got[k], logits[k], 1e-14);
}

TEST(Tcn, ChannelPermutationSymmetry) {
  TcnConfig c = micro_config();
  TcnParams p(c);
  Rng rng(3);
  init_uniform(p.parameters(), rng, 0.5);
  // Same weights for both input channels make the network blind to their order.
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t o = 0; o < 2; ++o) p.conv0.kernel.value.at(j, 1, o) = p.conv0.kernel.value.at(j, 0, o);
  const Tensor X = Tensor::matrix(4, 2, {0.1, 0.9, -0.4, 0.3, 0.7, -0.2, 0.05, 0.5});
  Tensor Xs({4, 2});
  for (std::size_t t = 0; t < 4; ++t) Xs.at(t, 0) = X.at(t, 1), Xs.at(t, 1) = X.at(t, 0);
  Graph g;
  const Tensor a = g.value(tcn_forward(g, g.constant(X), p));
  const Tensor b = g.value(tcn_forward(g, g.constant(Xs), p));
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(a[k], b[k], 1e-15);
}

TEST(Tcn, FrameCountMismatchRejected) {
  TcnParams p(micro_config());
  Graph g;
  EXPECT_THROW(tcn_forward(g, g.constant(Tensor({5, 2})), p), ValidationError);
}

TEST(Tcn, MicroGradientCheck) {
  TcnParams p(micro_config());
  Rng rng(1);
  init_uniform(p.parameters(), rng, 0.8);
  Tensor X({4, 2});
  for (auto& v : X.values()) v = rng.uniform(-1, 1);
  const ActionLabel label = ActionLabel::make(1, 2);
  LossFn loss = [&](Graph& g) { return cls_loss(g, tcn_forward(g, g.constant(X), p), label); };
  EXPECT_LT(finite_diff_check(loss, p.parameters()).max_relative_error, 1e-5);
}

TEST(Classify, ArgmaxWithLowestIndexTies) {
  EXPECT_EQ(classify(std::vector<double>{0.1, 0.9}), 1u);
  EXPECT_EQ(classify(std::vector<double>{2, 2, 2}), 0u);
  EXPECT_EQ(classify(std::vector<double>{3, -1, 2}), 0u);
  EXPECT_EQ(classify(std::vector<double>{-1, 5, 5}), 1u);
}

TEST(Classify, InvariantUnderIncreasingTransform) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> z(5), t(5);
    for (std::size_t i = 0; i < 5; ++i) {
      z[i] = rng.uniform(-3, 3);
      t[i] = std::exp(z[i]) * 2 + 7;
    }
    EXPECT_EQ(classify(z), classify(t));
  }
}

TEST(ClsLoss, ValuesAndMonotonicity) {
  const ActionLabel label = ActionLabel::make(0, 2);
  auto loss = [&](Tensor z, ClsLossKind k = ClsLossKind::sigmoid) {
    Graph g;
    return g.scalar(cls_loss(g, g.constant(std::move(z)), label, k));
  };
  EXPECT_NEAR(loss(Tensor({2})), 2 * std::log(2.0), 1e-15);
  EXPECT_LT(loss(Tensor::vector({40, -40})), 1e-8);
  EXPECT_NEAR(loss(Tensor({2}), ClsLossKind::softmax), std::log(2.0), 1e-15);
  double prev = loss(Tensor::vector({-3, 0.5}));
  for (double z = -2.5; z <= 5; z += 0.5) {
    const double cur = loss(Tensor::vector({z, 0.5}));
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(ActionLabelMake, OneHot) {
  const ActionLabel a = ActionLabel::make(2, 4);
  EXPECT_EQ(a.one_hot, Tensor::vector({0, 0, 1, 0}));
  EXPECT_THROW(ActionLabel::make(4, 4), ValidationError);
}

TEST(TcnLearnability, SyntheticActionsReachNinetyPercent) {
  SynthSpec spec;
  spec.num_clips = 32;
  const auto data = synth_generate(spec, 5);
  std::vector<ClipRecord> records;
  for (const auto& c : data.clips) records.push_back(c.record);
  const auto classes = action_classes(records);
  const auto correct = train_standalone_tcn(data, classes, 200, 1e-3, 1);
  EXPECT_GE(static_cast<double>(correct.size()) / 32.0, 0.9);
}

TEST(TcnLearnability, NoiselessDataIsFullySeparable) {
  SynthSpec spec;
  spec.num_clips = 32;
  spec.noise_sigma = 0.0;
  const auto data = synth_generate(spec, 6);
  std::vector<ClipRecord> records;
  for (const auto& c : data.clips) records.push_back(c.record);
  const auto classes = action_classes(records);
  EXPECT_EQ(train_standalone_tcn(data, classes, 200, 1e-3, 2).size(), 32u);
}
