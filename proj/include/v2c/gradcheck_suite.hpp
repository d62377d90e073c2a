#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace v2c {

struct GradCheckOptions {
  double epsilon = 1e-6;
  double primitive_threshold = 1e-7;
  double unroll_threshold = 1e-6;
  double tcn_threshold = 1e-5;
  double model_threshold = 1e-4;
  std::size_t seeds = 10;
  std::uint64_t seed = 1;
  // Adds a check on an op with a deliberately wrong backward pass.
  bool inject_fault = false;
};

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

// Finite-difference checks for every primitive on random small shapes, the
// recurrent cells, both branches and the joint loss on a two-clip micro-batch.
std::vector<GradCheckEntry> run_gradcheck_suite(const GradCheckOptions& options);

}  // namespace v2c
