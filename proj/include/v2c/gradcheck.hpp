#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "v2c/graph.hpp"

namespace v2c {

// Builds the scalar loss on a fresh graph from the current parameter values.
using LossFn = std::function<Var(Graph&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

// Compares backward() against central differences (f(x+e) - f(x-e)) / 2e on every
// coordinate of every listed parameter. Relative error per coordinate is
// |a - n| / max(1e-8, |a| + |n|). Parameter values are restored afterwards and
// gradients are left holding the analytic result.
GradCheckResult finite_diff_check(const LossFn& loss_fn, std::span<Parameter* const> params,
                                  double epsilon = 1e-6);

namespace diagnostics {

// x -> x^2 elementwise with a deliberately wrong derivative (x instead of 2x).
// Exists so callers can confirm that the checker rejects a broken backward pass.
Var broken_square(Graph& g, Var x);

}  // namespace diagnostics

}  // namespace v2c
