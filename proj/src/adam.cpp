#include "v2c/adam.hpp"

#include <cmath>

#include "v2c/error.hpp"

namespace v2c {

void adam_step(Parameter& param, AdamState& state, const AdamConfig& config) {
  if (state.first_moment.shape() != param.value.shape() || state.second_moment.shape() != param.value.shape()) {
    throw DimensionError("adam_step: optimizer state for '" + param.name + "' has shape " +
                         shape_string(state.first_moment.shape()) + ", parameter has " +
                         shape_string(param.value.shape()));
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  auto w = param.value.values();
  auto g = param.grad.values();
  auto m = state.first_moment.values();
  auto v = state.second_moment.values();
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    w[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  states_.reserve(params_.size());
  for (auto* p : params_) states_.emplace_back(p->value.shape());
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], states_[i], config_);
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

}  // namespace v2c
