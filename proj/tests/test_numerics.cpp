#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "v2c/adam.hpp"
#include "v2c/error.hpp"
#include "v2c/gradcheck.hpp"
#include "v2c/gradcheck_suite.hpp"
#include "v2c/ops.hpp"
#include "v2c/rng.hpp"

using namespace v2c;

namespace {

Tensor eval(const std::function<Var(Graph&)>& f) {
  Graph g;
  return g.value(f(g));
}

}  // namespace

TEST(Ops, AffineMatchesHandProduct) {
  const Tensor y = eval([](Graph& g) {
    return ops::affine(g, g.constant(Tensor::vector({1, 2})), g.constant(Tensor::matrix(2, 2, {1, 0, 2, 1})),
                       g.constant(Tensor::vector({2, 3})));
  });
  EXPECT_EQ(y, Tensor::vector({3, 7}));
}

TEST(Ops, AffineRejectsMismatchedShapes) {
  Graph g;
  EXPECT_THROW(ops::affine(g, g.constant(Tensor::vector({1, 2, 3})), g.constant(Tensor::matrix(2, 2, {1, 0, 2, 1})),
                           g.constant(Tensor::vector({0, 0}))),
               DimensionError);
}

TEST(Ops, SigmoidAndTanhValues) {
  const Tensor s = eval([](Graph& g) { return ops::sigmoid(g, g.constant(Tensor::vector({0, 1, -800, 800}))); });
  EXPECT_EQ(s[0], 0.5);
  EXPECT_NEAR(s[1], 0.7310585786300049, 1e-15);
  EXPECT_EQ(s[2], 0.0);
  EXPECT_EQ(s[3], 1.0);
  const Tensor t = eval([](Graph& g) { return ops::tanh_act(g, g.constant(Tensor::vector({0, 1, -1}))); });
  EXPECT_EQ(t[0], 0.0);
  EXPECT_NEAR(t[1], 0.7615941559557649, 1e-15);
  EXPECT_EQ(t[2], -t[1]);
}

TEST(Ops, Relu) {
  EXPECT_EQ(eval([](Graph& g) { return ops::relu(g, g.constant(Tensor::vector({-1, 0, 2}))); }),
            Tensor::vector({0, 0, 2}));
  EXPECT_EQ(eval([](Graph& g) { return ops::relu(g, g.constant(Tensor::vector({3.5}))); }), Tensor::vector({3.5}));
}

TEST(Ops, SoftmaxValuesAndShiftInvariance) {
  const Tensor p = eval([](Graph& g) { return ops::softmax(g, g.constant(Tensor::vector({1, 2}))); });
  const double e1 = std::exp(1.0), e2 = std::exp(2.0);
  EXPECT_NEAR(p[0], e1 / (e1 + e2), 1e-15);
  EXPECT_NEAR(p[1], 0.7310585786300049, 1e-15);

  const Tensor u = eval([](Graph& g) { return ops::softmax(g, g.constant(Tensor::vector({0, 0, 0}))); });
  for (double v : u.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);

  const Tensor big = eval([](Graph& g) { return ops::softmax(g, g.constant(Tensor::vector({5, 5 + 1000}))); });
  EXPECT_NEAR(big[1], 1.0, 1e-12);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x({7});
    for (auto& v : x.values()) v = rng.uniform(-10, 10);
    const double c = rng.uniform(-50, 50);
    Tensor xs = x;
    for (auto& v : xs.values()) v += c;
    const Tensor a = eval([&](Graph& g) { return ops::softmax(g, g.constant(x)); });
    const Tensor b = eval([&](Graph& g) { return ops::softmax(g, g.constant(xs)); });
    EXPECT_NEAR(std::accumulate(a.values().begin(), a.values().end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Ops, TemporalConvHandExample) {
  const Tensor y = eval([](Graph& g) {
    return ops::temporal_conv(g, g.constant(Tensor::matrix(3, 1, {1, 2, 3})), g.constant(Tensor({3, 1, 1}, 1.0)),
                              g.constant(Tensor({1})));
  });
  EXPECT_EQ(y, Tensor::matrix(3, 1, {3, 6, 5}));
}

TEST(Ops, TemporalConvIdentityAndBias) {
  Tensor X({4, 3});
  Rng rng(9);
  for (auto& v : X.values()) v = rng.uniform(-1, 1);
  Tensor K({1, 3, 3});
  for (std::size_t i = 0; i < 3; ++i) K.at(0, i, i) = 1.0;
  EXPECT_EQ(eval([&](Graph& g) { return ops::temporal_conv(g, g.constant(X), g.constant(K), g.constant(Tensor({3}))); }),
            X);
  const Tensor b = Tensor::vector({0.5, -1, 2});
  const Tensor y = eval([&](Graph& g) {
    return ops::temporal_conv(g, g.constant(Tensor({4, 3})), g.constant(Tensor({3, 3, 3}, 0.7)), g.constant(b));
  });
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t o = 0; o < 3; ++o) EXPECT_EQ(y.at(t, o), b[o]);
}

TEST(Ops, TemporalConvRejectsEvenWidthAndBadShapes) {
  Graph g;
  EXPECT_THROW(ops::temporal_conv(g, g.constant(Tensor({3, 1})), g.constant(Tensor({2, 1, 1})), g.constant(Tensor({1}))),
               DimensionError);
  EXPECT_THROW(ops::temporal_conv(g, g.constant(Tensor({3, 2})), g.constant(Tensor({3, 1, 1})), g.constant(Tensor({1}))),
               DimensionError);
}

TEST(Ops, TemporalMaxpool) {
  EXPECT_EQ(eval([](Graph& g) { return ops::temporal_maxpool(g, g.constant(Tensor::matrix(4, 1, {1, 3, 2, 5})), 2, 2); }),
            Tensor::matrix(2, 1, {3, 5}));
  // ceil(T/stride) windows; the last one is clipped.
  EXPECT_EQ(eval([](Graph& g) { return ops::temporal_maxpool(g, g.constant(Tensor::matrix(5, 1, {1, 3, 2, 5, 4})), 2, 2); }),
            Tensor::matrix(3, 1, {3, 5, 4}));
  const Tensor X = Tensor::matrix(3, 2, {1, -2, 4, 0.5, -3, 7});
  EXPECT_EQ(eval([&](Graph& g) { return ops::temporal_maxpool(g, g.constant(X), 1, 1); }), X);
  EXPECT_EQ(eval([](Graph& g) { return ops::temporal_maxpool(g, g.constant(Tensor({6, 2}, 1.25)), 2, 2); }),
            Tensor({3, 2}, 1.25));
}

TEST(Ops, SigmoidCrossEntropy) {
  auto sce = [](Tensor z, Tensor y) {
    Graph g;
    return g.scalar(ops::sigmoid_cross_entropy(g, g.constant(std::move(z)), y));
  };
  EXPECT_NEAR(sce(Tensor({2}), Tensor::vector({1, 0})), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(sce(Tensor({1}), Tensor::vector({1})), std::log(2.0), 1e-15);
  EXPECT_LT(sce(Tensor::vector({-40, 40, -40}), Tensor::vector({0, 1, 0})), 1e-8);
  EXPECT_THROW(sce(Tensor({2}), Tensor::vector({1, 1})), ValidationError);
  EXPECT_THROW(sce(Tensor({2}), Tensor::vector({0.5, 0.5})), ValidationError);
}

TEST(Ops, SoftmaxCrossEntropy) {
  auto ce = [](Tensor z, std::size_t t) {
    Graph g;
    return g.scalar(ops::softmax_cross_entropy(g, g.constant(std::move(z)), t));
  };
  EXPECT_NEAR(ce(Tensor({4}), 2), std::log(4.0), 1e-15);
  EXPECT_LT(ce(Tensor::vector({-40, 40, -40}), 1), 1e-8);
  EXPECT_NEAR(ce(Tensor::vector({1, 2}), 1), -std::log(std::exp(2.0) / (std::exp(1.0) + std::exp(2.0))), 1e-15);
  EXPECT_NEAR(ce(Tensor::vector({1, 2}), 1), 0.31326168751822286, 1e-15);
  EXPECT_THROW(ce(Tensor({3}), 3), ValidationError);

  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor z({6});
    for (auto& v : z.values()) v = rng.uniform(-5, 5);
    const std::size_t t = rng.below(6);
    const Tensor p = eval([&](Graph& g) { return ops::softmax(g, g.constant(z)); });
    EXPECT_NEAR(ce(z, t) + std::log(p[t]), 0.0, 1e-10);
  }
}

TEST(Ops, DeterministicBitIdentical) {
  Rng rng(11);
  Tensor X({6, 4}), K({3, 4, 5});
  for (auto& v : X.values()) v = rng.uniform(-1, 1);
  for (auto& v : K.values()) v = rng.uniform(-1, 1);
  auto f = [&](Graph& g) {
    return ops::softmax(g, ops::flatten(g, ops::temporal_maxpool(g, ops::temporal_conv(g, g.constant(X), g.constant(K), g.constant(Tensor({5}))), 2, 2)));
  };
  EXPECT_TRUE(bit_identical(eval(f), eval(f)));
}

TEST(Graph, LinearMapGradientIsInput) {
  Parameter W("W", {2, 3});
  W.value = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor x = Tensor::vector({0.5, -1, 2});
  Graph g;
  g.backward(ops::sum(g, ops::affine(g, g.constant(x), g.param(W), g.constant(Tensor({2})))));
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(W.grad.at(o, i), x[i]);
}

TEST(Graph, SharedParameterAccumulates) {
  Parameter w("w", {1});
  w.value[0] = 3.0;
  Graph g;
  const Var a = g.param(w);
  const Var b = g.param(w);
  EXPECT_EQ(a.id, b.id);
  g.backward(ops::sum(g, ops::add(g, ops::mul(g, a, b), ops::scale(g, a, 2.0))));
  EXPECT_EQ(w.grad[0], 2 * 3.0 + 2.0);
}

TEST(Graph, UnusedAndConstantLossLeaveZeroGradient) {
  Parameter used("used", {2}), unused("unused", {2});
  used.value = Tensor::vector({1, 2});
  {
    Graph g;
    g.param(unused);
    g.backward(ops::sum(g, g.param(used)));
  }
  EXPECT_EQ(unused.grad, Tensor({2}));
  EXPECT_EQ(used.grad, Tensor::vector({1, 1}));

  Parameter p("p", {2});
  Graph g;
  g.param(p);
  g.backward(ops::sum(g, g.constant(Tensor::vector({4, 5}))));
  EXPECT_EQ(p.grad, Tensor({2}));
}

TEST(Graph, BackwardErrors) {
  Graph empty;
  EXPECT_THROW(empty.backward(Var{}), StateError);
  Parameter p("p", {2});
  Graph g;
  const Var v = g.param(p);
  EXPECT_THROW(g.backward(v), DimensionError);
  const Var s = ops::sum(g, v);
  g.backward(s);
  EXPECT_THROW(g.backward(s), StateError);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  const AdamConfig cfg;
  Parameter p("p", {4});
  p.grad = Tensor::vector({3.0, -0.5, 1e-3, -200});
  AdamState s(p.value.shape());
  adam_step(p, s, cfg);
  EXPECT_EQ(s.step_count, 1u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_GE(std::abs(p.value[i]), 0.9 * cfg.lr);
    EXPECT_LE(std::abs(p.value[i]), cfg.lr);
    EXPECT_EQ(std::signbit(p.value[i]), !std::signbit(p.grad[i]));
  }
}

TEST(Adam, ZeroGradientLeavesFreshParameterAndDecaysMoments) {
  const AdamConfig cfg;
  Parameter fresh("fresh", {2});
  fresh.value = Tensor::vector({1.5, -2});
  AdamState s0(fresh.value.shape());
  adam_step(fresh, s0, cfg);
  EXPECT_EQ(fresh.value, Tensor::vector({1.5, -2}));

  Parameter p("p", {2});
  AdamState s(p.value.shape());
  s.first_moment = Tensor::vector({0.2, -0.4});
  s.second_moment = Tensor::vector({0.01, 0.02});
  adam_step(p, s, cfg);
  EXPECT_EQ(s.first_moment, Tensor::vector({0.9 * 0.2, 0.9 * -0.4}));
  EXPECT_EQ(s.second_moment, Tensor::vector({0.999 * 0.01, 0.999 * 0.02}));
}

TEST(Adam, IdenticalInputsGiveIdenticalUpdates) {
  Parameter a("a", {3}), b("b", {3});
  a.value = b.value = Tensor::vector({0.1, 0.2, 0.3});
  a.grad = b.grad = Tensor::vector({1, -2, 3});
  Adam opt({&a, &b}, AdamConfig{});
  for (int i = 0; i < 5; ++i) opt.step();
  EXPECT_TRUE(bit_identical(a.value, b.value));
}

TEST(GradCheck, QuadraticLossIsExact) {
  Parameter W("W", {3, 2});
  Rng rng(1);
  for (auto& v : W.value.values()) v = rng.uniform(-1, 1);
  LossFn half_norm = [&](Graph& g) {
    const Var w = g.param(W);
    return ops::scale(g, ops::sum(g, ops::mul(g, w, w)), 0.5);
  };
  Parameter* ps[] = {&W};
  const auto r = finite_diff_check(half_norm, ps);
  EXPECT_LT(r.max_relative_error, 1e-9);
  EXPECT_EQ(r.coordinates, 6u);
  EXPECT_EQ(W.grad, W.value);
}

TEST(GradCheck, ZeroParametersSymmetricLoss) {
  Parameter W("W", {4});
  LossFn even = [&](Graph& g) {
    const Var w = g.param(W);
    return ops::sum(g, ops::mul(g, w, w));
  };
  Parameter* ps[] = {&W};
  EXPECT_EQ(finite_diff_check(even, ps).max_relative_error, 0.0);
}

TEST(GradCheck, RejectsNonFiniteLoss) {
  Parameter W("W", {1});
  W.value[0] = 1e308;
  LossFn blowup = [&](Graph& g) {
    const Var w = g.param(W);
    return ops::sum(g, ops::mul(g, w, w));
  };
  Parameter* ps[] = {&W};
  EXPECT_THROW(finite_diff_check(blowup, ps), NumericError);
}

TEST(GradCheck, DetectsBrokenBackward) {
  Parameter x("x", {3});
  x.value = Tensor::vector({0.7, -1.2, 0.9});
  LossFn loss = [&](Graph& g) { return ops::sum(g, diagnostics::broken_square(g, g.param(x))); };
  Parameter* ps[] = {&x};
  EXPECT_GT(finite_diff_check(loss, ps).max_relative_error, 0.1);
}

TEST(GradCheck, SuitePassesEveryCheck) {
  for (const auto& e : run_gradcheck_suite(GradCheckOptions{})) {
    EXPECT_TRUE(e.passed) << e.name << " " << e.max_relative_error << " >= " << e.threshold;
  }
}

TEST(GradCheck, SuiteFlagsInjectedFault) {
  GradCheckOptions o;
  o.seeds = 1;
  o.inject_fault = true;
  const auto entries = run_gradcheck_suite(o);
  ASSERT_EQ(entries.back().name, "injected_fault");
  EXPECT_FALSE(entries.back().passed);
}
