#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "v2c/graph.hpp"

namespace v2c {

enum class ClsLossKind { sigmoid, softmax };

struct TcnConfig {
  std::size_t frames = 30;
  std::size_t feature_dim = 0;
  std::size_t classes = 0;
  std::array<std::size_t, 3> filters{128, 64, 32};
  std::size_t kernel_width = 3;
  std::size_t pool_width = 2;
  std::size_t pool_stride = 2;
  std::size_t fc_hidden = 256;

  // Time steps left after the two pooling stages.
  std::size_t pooled_frames() const;
  std::size_t flat_dim() const { return pooled_frames() * filters[2]; }
  void validate() const;
};

struct ConvLayer {
  Parameter kernel;  // [width x d_in x d_out]
  Parameter bias;    // [d_out]
};

struct TcnParams {
  TcnParams() = default;
  explicit TcnParams(const TcnConfig& config);

  std::vector<Parameter*> parameters();

  TcnConfig config;
  ConvLayer conv0, conv1, conv2;
  Parameter fc0_W, fc0_b;  // [fc_hidden x flat], [fc_hidden]
  Parameter fc1_W, fc1_b;  // [classes x fc_hidden], [classes]
};

struct ActionLabel {
  static ActionLabel make(std::size_t class_index, std::size_t classes);

  std::size_t class_index = 0;
  Tensor one_hot;
};

// X [frames x feature_dim] -> class logits [classes]; the last layer has no activation.
Var tcn_forward(Graph& g, Var X, TcnParams& p);

// Argmax with ties broken towards the lowest index.
std::size_t classify(std::span<const double> logits);

Var cls_loss(Graph& g, Var logits, const ActionLabel& label, ClsLossKind kind = ClsLossKind::sigmoid);

}  // namespace v2c
