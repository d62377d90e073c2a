#include "v2c/tcn.hpp"

#include "v2c/error.hpp"
#include "v2c/ops.hpp"

namespace v2c {

std::size_t TcnConfig::pooled_frames() const {
  std::size_t t = frames;
  for (int stage = 0; stage < 2; ++stage) t = (t + pool_stride - 1) / pool_stride;
  return t;
}

void TcnConfig::validate() const {
  if (frames == 0 || feature_dim == 0 || classes == 0) {
    throw ValidationError("tcn: frames, feature_dim and classes must be positive");
  }
  for (auto f : filters) {
    if (f == 0) throw ValidationError("tcn: filter counts must be positive");
  }
  if (kernel_width % 2 == 0) throw ValidationError("tcn: kernel width must be odd");
  if (pool_width == 0 || pool_stride == 0 || fc_hidden == 0) {
    throw ValidationError("tcn: pooling and fc sizes must be positive");
  }
}

TcnParams::TcnParams(const TcnConfig& cfg) : config(cfg) {
  config.validate();
  const std::size_t w = cfg.kernel_width;
  conv0 = {Parameter("tcn.conv0.kernel", {w, cfg.feature_dim, cfg.filters[0]}),
           Parameter("tcn.conv0.bias", {cfg.filters[0]})};
  conv1 = {Parameter("tcn.conv1.kernel", {w, cfg.filters[0], cfg.filters[1]}),
           Parameter("tcn.conv1.bias", {cfg.filters[1]})};
  conv2 = {Parameter("tcn.conv2.kernel", {w, cfg.filters[1], cfg.filters[2]}),
           Parameter("tcn.conv2.bias", {cfg.filters[2]})};
  fc0_W = Parameter("tcn.fc0.W", {cfg.fc_hidden, cfg.flat_dim()});
  fc0_b = Parameter("tcn.fc0.b", {cfg.fc_hidden});
  fc1_W = Parameter("tcn.fc1.W", {cfg.classes, cfg.fc_hidden});
  fc1_b = Parameter("tcn.fc1.b", {cfg.classes});
}

std::vector<Parameter*> TcnParams::parameters() {
  return {&conv0.kernel, &conv0.bias, &conv1.kernel, &conv1.bias, &conv2.kernel,
          &conv2.bias,   &fc0_W,      &fc0_b,        &fc1_W,        &fc1_b};
}

ActionLabel ActionLabel::make(std::size_t class_index, std::size_t classes) {
  if (class_index >= classes) {
    throw ValidationError("action class " + std::to_string(class_index) + " outside [0, " + std::to_string(classes) +
                          ")");
  }
  ActionLabel label{class_index, Tensor({classes})};
  label.one_hot[class_index] = 1.0;
  return label;
}

Var tcn_forward(Graph& g, Var X, TcnParams& p) {
  const TcnConfig& c = p.config;
  const Tensor& xv = g.value(X);
  if (xv.rank() != 2 || xv.dim(0) != c.frames) {
    throw ValidationError("tcn: expected " + std::to_string(c.frames) + " frames, got input " +
                          shape_string(xv.shape()));
  }
  auto conv = [&](Var in, ConvLayer& layer) {
    return ops::temporal_conv(g, in, g.param(layer.kernel), g.param(layer.bias));
  };
  auto pool = [&](Var in) { return ops::temporal_maxpool(g, ops::relu(g, in), c.pool_width, c.pool_stride); };

  const Var c0 = conv(X, p.conv0);
  const Var c1 = conv(pool(c0), p.conv1);
  const Var c2 = conv(pool(c1), p.conv2);
  const Var flat = ops::flatten(g, ops::relu(g, c2));
  const Var f0 = ops::relu(g, ops::affine(g, flat, g.param(p.fc0_W), g.param(p.fc0_b)));
  return ops::affine(g, f0, g.param(p.fc1_W), g.param(p.fc1_b));
}

std::size_t classify(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

Var cls_loss(Graph& g, Var logits, const ActionLabel& label, ClsLossKind kind) {
  if (kind == ClsLossKind::softmax) return ops::softmax_cross_entropy(g, logits, label.class_index);
  return ops::sigmoid_cross_entropy(g, logits, label.one_hot);
}

}  // namespace v2c
