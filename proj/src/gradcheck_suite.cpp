#include "v2c/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>
#include <memory>

#include "v2c/gradcheck.hpp"
#include "v2c/model.hpp"
#include "v2c/ops.hpp"
#include "v2c/rng.hpp"

namespace v2c {

namespace {

// Values of magnitude in [0.5, 1.5] with random sign, so that no coordinate
// of the checked gradients sits near zero by accident.
void fill_away_from_zero(Tensor& t, Rng& rng) {
  for (auto& v : t.values()) {
    const double mag = rng.uniform(0.5, 1.5);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
}

std::size_t small_dim(Rng& rng) { return 1 + rng.below(8); }

// A primitive check covers the whole Jacobian: every output coordinate in
// turn is the scalar loss, so each checked entry is a single partial
// derivative rather than a sum that may cancel towards zero.
struct Case {
  std::vector<std::unique_ptr<Parameter>> params;
  std::function<Var(Graph&, std::vector<Var>&)> op;

  Parameter& add(Shape shape, Rng& rng) {
    params.push_back(std::make_unique<Parameter>("p" + std::to_string(params.size()), shape));
    fill_away_from_zero(params.back()->value, rng);
    return *params.back();
  }

  double check(double eps) {
    Shape out_shape;
    {
      Graph g;
      std::vector<Var> in;
      for (auto& p : params) in.push_back(g.param(*p));
      out_shape = g.value(op(g, in)).shape();
    }
    std::vector<Parameter*> raw;
    for (auto& p : params) raw.push_back(p.get());
    double worst = 0.0;
    Tensor pick(out_shape);
    for (std::size_t j = 0; j < pick.size(); ++j) {
      pick.fill(0.0);
      pick[j] = 1.0;
      LossFn loss = [&](Graph& g) {
        std::vector<Var> in;
        for (auto& p : params) in.push_back(g.param(*p));
        return ops::sum(g, ops::mul(g, op(g, in), g.constant(pick)));
      };
      worst = std::max(worst, finite_diff_check(loss, raw, eps).max_relative_error);
    }
    return worst;
  }
};

using CaseBuilder = std::function<Case(Rng&)>;

std::vector<std::pair<std::string, CaseBuilder>> primitive_cases() {
  std::vector<std::pair<std::string, CaseBuilder>> cases;
  auto unary = [](auto fn) {
    return [fn](Rng& rng) {
      Case c;
      c.add({small_dim(rng)}, rng);
      c.op = [fn](Graph& g, std::vector<Var>& in) { return fn(g, in[0]); };
      return c;
    };
  };
  cases.emplace_back("affine", [](Rng& rng) {
    Case c;
    const auto din = small_dim(rng), dout = small_dim(rng);
    c.add({din}, rng);
    c.add({dout, din}, rng);
    c.add({dout}, rng);
    c.op = [](Graph& g, std::vector<Var>& in) { return ops::affine(g, in[0], in[1], in[2]); };
    return c;
  });
  cases.emplace_back("gate", [](Rng& rng) {
    Case c;
    const auto din = small_dim(rng), h = small_dim(rng);
    c.add({h, din}, rng);
    c.add({din}, rng);
    c.add({h, h}, rng);
    c.add({h}, rng);
    c.add({h}, rng);
    c.op = [](Graph& g, std::vector<Var>& in) { return ops::gate(g, in[0], in[1], in[2], in[3], in[4]); };
    return c;
  });
  cases.emplace_back("add", [](Rng& rng) {
    Case c;
    const auto n = small_dim(rng);
    c.add({n}, rng);
    c.add({n}, rng);
    c.op = [](Graph& g, std::vector<Var>& in) { return ops::add(g, in[0], in[1]); };
    return c;
  });
  cases.emplace_back("mul", [](Rng& rng) {
    Case c;
    const auto n = small_dim(rng);
    c.add({n}, rng);
    c.add({n}, rng);
    c.op = [](Graph& g, std::vector<Var>& in) { return ops::mul(g, in[0], in[1]); };
    return c;
  });
  cases.emplace_back("one_minus", unary([](Graph& g, Var x) { return ops::one_minus(g, x); }));
  cases.emplace_back("scale", unary([](Graph& g, Var x) { return ops::scale(g, x, -1.75); }));
  cases.emplace_back("sum", unary([](Graph& g, Var x) { return ops::sum(g, x); }));
  cases.emplace_back("sigmoid", unary([](Graph& g, Var x) { return ops::sigmoid(g, x); }));
  cases.emplace_back("tanh", unary([](Graph& g, Var x) { return ops::tanh_act(g, x); }));
  cases.emplace_back("relu", unary([](Graph& g, Var x) { return ops::relu(g, x); }));
  cases.emplace_back("softmax", unary([](Graph& g, Var x) { return ops::softmax(g, x); }));
  cases.emplace_back("concat", [](Rng& rng) {
    Case c;
    c.add({small_dim(rng)}, rng);
    c.add({small_dim(rng)}, rng);
    c.op = [](Graph& g, std::vector<Var>& in) { return ops::concat(g, in[0], in[1]); };
    return c;
  });
  cases.emplace_back("row_stack", [](Rng& rng) {
    Case c;
    const auto rows = small_dim(rng);
    c.add({rows, small_dim(rng)}, rng);
    c.op = [rows](Graph& g, std::vector<Var>& in) {
      std::vector<Var> r;
      for (std::size_t i = rows; i-- > 0;) r.push_back(ops::row(g, in[0], i));
      return ops::stack_rows(g, r);
    };
    return c;
  });
  cases.emplace_back("flatten", [](Rng& rng) {
    Case c;
    c.add({small_dim(rng), small_dim(rng)}, rng);
    c.op = [](Graph& g, std::vector<Var>& in) { return ops::flatten(g, in[0]); };
    return c;
  });
  cases.emplace_back("temporal_conv", [](Rng& rng) {
    Case c;
    const auto T = small_dim(rng), din = small_dim(rng), dout = small_dim(rng);
    const std::size_t w = 1 + 2 * rng.below(3);
    c.add({T, din}, rng);
    c.add({w, din, dout}, rng);
    c.add({dout}, rng);
    c.op = [](Graph& g, std::vector<Var>& in) { return ops::temporal_conv(g, in[0], in[1], in[2]); };
    return c;
  });
  cases.emplace_back("temporal_maxpool", [](Rng& rng) {
    Case c;
    const auto width = 1 + rng.below(3), stride = 1 + rng.below(3);
    c.add({small_dim(rng), small_dim(rng)}, rng);
    c.op = [width, stride](Graph& g, std::vector<Var>& in) { return ops::temporal_maxpool(g, in[0], width, stride); };
    return c;
  });
  cases.emplace_back("sigmoid_cross_entropy", [](Rng& rng) {
    Case c;
    const auto C = small_dim(rng);
    c.add({C}, rng);
    Tensor target({C});
    target[rng.below(C)] = 1.0;
    c.op = [target](Graph& g, std::vector<Var>& in) { return ops::sigmoid_cross_entropy(g, in[0], target); };
    return c;
  });
  cases.emplace_back("softmax_cross_entropy", [](Rng& rng) {
    Case c;
    const auto k = 1 + small_dim(rng);
    c.add({k}, rng);
    const std::size_t target = rng.below(k);
    c.op = [target](Graph& g, std::vector<Var>& in) { return ops::softmax_cross_entropy(g, in[0], target); };
    return c;
  });
  return cases;
}

// Small joint model on a two-clip batch.
struct MicroModel {
  V2CParams model;
  std::vector<Example> batch;
};

MicroModel micro_model(CellKind cell, bool joint, std::uint64_t seed) {
  ModelConfig c;
  c.frames = 4;
  c.hidden = 3;
  c.cell = cell;
  c.feature_dim = 2;
  c.joint = joint;
  c.seed = seed;
  c.filters = {2, 2, 2};
  c.fc_hidden = 3;
  const std::vector<std::string> commands{"righthand cut apple", "lefthand pour"};
  MicroModel m{make_model(c, Vocabulary::build(commands), {"cut", "pour"}, Tensor({2}, 0.25)), {}};
  // Larger weights than the training initialisation so every layer is exercised.
  Rng rng(derive_seed(seed, 99));
  init_uniform(m.model.parameters(), rng, 0.8);
  for (std::size_t i = 0; i < commands.size(); ++i) {
    Tensor raw({3 + i, 2});
    for (auto& v : raw.values()) v = rng.uniform(-1.0, 1.0);
    m.batch.push_back(make_example("clip" + std::to_string(i), raw, commands[i], i == 0 ? "cut" : "pour", m.model));
  }
  return m;
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(const GradCheckOptions& options) {
  std::vector<GradCheckEntry> out;
  auto record = [&](std::string name, double err, double threshold) {
    out.push_back(GradCheckEntry{std::move(name), err, threshold, err < threshold});
  };

  for (auto& [name, build] : primitive_cases()) {
    double worst = 0.0;
    for (std::size_t s = 0; s < options.seeds; ++s) {
      Rng rng(derive_seed(options.seed, s));
      Case c = build(rng);
      worst = std::max(worst, c.check(options.epsilon));
    }
    record(name, worst, options.primitive_threshold);
  }

  for (CellKind kind : {CellKind::lstm, CellKind::gru}) {
    double worst = 0.0;
    for (std::size_t s = 0; s < options.seeds; ++s) {
      RnnParams p = init_rnn(kind, "cell", 1, 1, derive_seed(options.seed, 100 + s));
      Rng rng(derive_seed(options.seed, 200 + s));
      init_uniform(parameters(p), rng, 1.0);
      Tensor X({4, 1});
      for (auto& v : X.values()) v = rng.uniform(-1.0, 1.0);
      LossFn loss = [&](Graph& g) { return ops::sum(g, unroll(g, g.constant(X), p, zero_state(g, p))); };
      worst = std::max(worst, finite_diff_check(loss, parameters(p), options.epsilon).max_relative_error);
    }
    record(to_string(kind) + "_unroll_4_steps", worst, options.unroll_threshold);
  }

  {
    MicroModel m = micro_model(CellKind::lstm, true, options.seed);
    LossFn loss = [&](Graph& g) {
      const Var X = g.constant(m.batch[0].features);
      return cls_loss(g, tcn_forward(g, X, m.model.tcn), m.batch[0].label);
    };
    record("tcn_micro", finite_diff_check(loss, m.model.tcn.parameters(), options.epsilon).max_relative_error,
           options.tcn_threshold);
  }

  for (CellKind kind : {CellKind::lstm, CellKind::gru}) {
    MicroModel m = micro_model(kind, true, options.seed);
    LossFn loss = [&](Graph& g) { return forward_loss(g, m.batch, m.model).total; };
    record("joint_loss_2clip_" + to_string(kind),
           finite_diff_check(loss, m.model.parameters(), options.epsilon).max_relative_error, options.model_threshold);
  }

  if (options.inject_fault) {
    Parameter x("x", {3});
    x.value = Tensor::vector({0.7, -1.2, 0.9});
    Parameter* px = &x;
    LossFn loss = [&](Graph& g) { return ops::sum(g, diagnostics::broken_square(g, g.param(x))); };
    record("injected_fault", finite_diff_check(loss, std::span(&px, 1), options.epsilon).max_relative_error,
           options.primitive_threshold);
  }
  return out;
}

}  // namespace v2c
