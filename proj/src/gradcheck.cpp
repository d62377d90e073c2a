#include "v2c/gradcheck.hpp"

#include <cmath>

#include "v2c/error.hpp"

namespace v2c {

namespace {

double evaluate(const LossFn& loss_fn) {
  Graph g;
  const double v = g.scalar(loss_fn(g));
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(const LossFn& loss_fn, std::span<Parameter* const> params, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("finite_diff_check: epsilon must be positive");
  for (auto* p : params) p->zero_grad();
  {
    Graph g;
    Var loss = loss_fn(g);
    if (!std::isfinite(g.scalar(loss))) throw NumericError("finite_diff_check: loss is not finite");
    g.backward(loss);
  }

  GradCheckResult result;
  for (auto* p : params) {
    auto w = p->value.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + epsilon;
      const double up = evaluate(loss_fn);
      w[i] = saved - epsilon;
      const double down = evaluate(loss_fn);
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = p->grad[i];
      const double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      ++result.coordinates;
      if (rel > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = rel;
        result.worst_parameter = p->name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

namespace diagnostics {

Var broken_square(Graph& g, Var x) {
  Tensor y = g.value(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= y[i];
  return g.record(std::move(y), g.requires_grad(x), [x](const Tensor& gy, Graph& gr) {
    const Tensor& xv = gr.value(x);
    Tensor* gx = gr.grad_sink(x);
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += gy[i] * xv[i];
  });
}

}  // namespace diagnostics

}  // namespace v2c
