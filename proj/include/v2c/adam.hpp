#pragma once

#include <cstdint>
#include <vector>

#include "v2c/graph.hpp"

namespace v2c {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamState() = default;
  explicit AdamState(const Shape& shape) : first_moment(shape), second_moment(shape) {}

  Tensor first_moment;
  Tensor second_moment;
  std::uint64_t step_count = 0;
};

// Bias-corrected Adam update of one parameter, in place.
void adam_step(Parameter& param, AdamState& state, const AdamConfig& config);

// Adam over a fixed parameter list; the list order defines the state order.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  void step();
  void zero_grad();

  const AdamConfig& config() const noexcept { return config_; }
  const std::vector<Parameter*>& params() const noexcept { return params_; }
  std::vector<AdamState>& states() noexcept { return states_; }
  const std::vector<AdamState>& states() const noexcept { return states_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<AdamState> states_;
  AdamConfig config_;
};

}  // namespace v2c
