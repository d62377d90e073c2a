#include "v2c/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "v2c/error.hpp"
#include "v2c/kernels.hpp"

namespace v2c::ops {

namespace {

void expect_rank(const Tensor& t, std::size_t rank, const char* op, const char* operand) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": operand " + operand + " must have rank " +
                         std::to_string(rank) + ", got " + shape_string(t.shape()));
  }
}

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": operand shapes differ, " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

bool any_grad(const Graph& g, std::initializer_list<Var> vars) {
  for (auto v : vars) {
    if (g.requires_grad(v)) return true;
  }
  return false;
}

// Elementwise unary op whose derivative is expressed through its output.
template <class F, class D>
Var unary(Graph& g, Var x, F f, D dydx_from_y) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  Tensor y_copy = y;
  return g.record(std::move(y), g.requires_grad(x),
                  [x, y = std::move(y_copy), dydx_from_y](const Tensor& gy, Graph& gr) {
                    Tensor* gx = gr.grad_sink(x);
                    for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i] * dydx_from_y(y[i]);
                  });
}

void check_affine(const Tensor& W, const Tensor& x, const char* wname, const char* xname) {
  expect_rank(W, 2, "affine", wname);
  expect_rank(x, 1, "affine", xname);
  if (W.dim(1) != x.dim(0)) {
    throw DimensionError(std::string("affine: ") + wname + " " + shape_string(W.shape()) +
                         " does not accept " + xname + " " + shape_string(x.shape()));
  }
}

void check_bias(const Tensor& W, const Tensor& b, const char* bname) {
  expect_rank(b, 1, "affine", bname);
  if (b.dim(0) != W.dim(0)) {
    throw DimensionError(std::string("affine: bias ") + bname + " " + shape_string(b.shape()) +
                         " does not match output width " + std::to_string(W.dim(0)));
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Var affine(Graph& g, Var x, Var W, Var b) {
  const Tensor& Wv = g.value(W);
  const Tensor& xv = g.value(x);
  const Tensor& bv = g.value(b);
  check_affine(Wv, xv, "W", "x");
  check_bias(Wv, bv, "b");
  Tensor y = bv;
  kernels::gemv(Wv.values(), Wv.dim(0), Wv.dim(1), xv.values(), y.values());
  return g.record(std::move(y), any_grad(g, {x, W, b}), [x, W, b](const Tensor& gy, Graph& gr) {
    const Tensor& Wv = gr.value(W);
    if (Tensor* gx = gr.grad_sink(x)) kernels::gemv_t(Wv.values(), Wv.dim(0), Wv.dim(1), gy.values(), gx->values());
    if (Tensor* gW = gr.grad_sink(W)) kernels::ger(gy.values(), gr.value(x).values(), gW->values());
    if (Tensor* gb = gr.grad_sink(b)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i];
    }
  });
}

Var gate(Graph& g, Var Wx, Var x, Var Wh, Var h, Var b) {
  const Tensor& Wxv = g.value(Wx);
  const Tensor& Whv = g.value(Wh);
  const Tensor& xv = g.value(x);
  const Tensor& hv = g.value(h);
  const Tensor& bv = g.value(b);
  check_affine(Wxv, xv, "W_x", "x");
  check_affine(Whv, hv, "W_h", "h");
  check_bias(Wxv, bv, "b");
  if (Whv.dim(0) != Wxv.dim(0)) throw DimensionError("gate: W_x and W_h output widths differ");
  Tensor y = bv;
  kernels::gemv(Wxv.values(), Wxv.dim(0), Wxv.dim(1), xv.values(), y.values());
  kernels::gemv(Whv.values(), Whv.dim(0), Whv.dim(1), hv.values(), y.values());
  return g.record(std::move(y), any_grad(g, {Wx, x, Wh, h, b}), [=](const Tensor& gy, Graph& gr) {
    const Tensor& Wxv = gr.value(Wx);
    const Tensor& Whv = gr.value(Wh);
    if (Tensor* gx = gr.grad_sink(x)) kernels::gemv_t(Wxv.values(), Wxv.dim(0), Wxv.dim(1), gy.values(), gx->values());
    if (Tensor* gh = gr.grad_sink(h)) kernels::gemv_t(Whv.values(), Whv.dim(0), Whv.dim(1), gy.values(), gh->values());
    if (Tensor* gW = gr.grad_sink(Wx)) kernels::ger(gy.values(), gr.value(x).values(), gW->values());
    if (Tensor* gW = gr.grad_sink(Wh)) kernels::ger(gy.values(), gr.value(h).values(), gW->values());
    if (Tensor* gb = gr.grad_sink(b)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i];
    }
  });
}

Var add(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  expect_same_shape(av, bv, "add");
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return g.record(std::move(y), any_grad(g, {a, b}), [a, b](const Tensor& gy, Graph& gr) {
    for (Var v : {a, b}) {
      if (Tensor* gv = gr.grad_sink(v)) {
        for (std::size_t i = 0; i < gy.size(); ++i) (*gv)[i] += gy[i];
      }
    }
  });
}

Var mul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  expect_same_shape(av, bv, "mul");
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return g.record(std::move(y), any_grad(g, {a, b}), [a, b](const Tensor& gy, Graph& gr) {
    if (Tensor* ga = gr.grad_sink(a)) {
      const Tensor& bv = gr.value(b);
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * bv[i];
    }
    if (Tensor* gb = gr.grad_sink(b)) {
      const Tensor& av = gr.value(a);
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * av[i];
    }
  });
}

Var one_minus(Graph& g, Var a) {
  const Tensor& av = g.value(a);
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 - av[i];
  return g.record(std::move(y), g.requires_grad(a), [a](const Tensor& gy, Graph& gr) {
    Tensor* ga = gr.grad_sink(a);
    for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] -= gy[i];
  });
}

Var scale(Graph& g, Var a, double factor) {
  Tensor y = g.value(a);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= factor;
  return g.record(std::move(y), g.requires_grad(a), [a, factor](const Tensor& gy, Graph& gr) {
    Tensor* ga = gr.grad_sink(a);
    for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * factor;
  });
}

Var sum(Graph& g, Var a) {
  const Tensor& av = g.value(a);
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i];
  return g.record(Tensor({1}, s), g.requires_grad(a), [a](const Tensor& gy, Graph& gr) {
    Tensor* ga = gr.grad_sink(a);
    for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += gy[0];
  });
}

Var add_n(Graph& g, std::span<const Var> scalars) {
  if (scalars.empty()) throw ValidationError("add_n: no operands");
  double s = 0.0;
  bool needs = false;
  for (Var v : scalars) {
    s += g.scalar(v);
    needs = needs || g.requires_grad(v);
  }
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  return g.record(Tensor({1}, s), needs, [inputs = std::move(inputs)](const Tensor& gy, Graph& gr) {
    for (Var v : inputs) {
      if (Tensor* gv = gr.grad_sink(v)) (*gv)[0] += gy[0];
    }
  });
}

Var sigmoid(Graph& g, Var x) {
  return unary(g, x, [](double v) { return sigmoid(v); }, [](double y) { return y * (1.0 - y); });
}

Var tanh_act(Graph& g, Var x) {
  return unary(g, x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Var relu(Graph& g, Var x) {
  return unary(g, x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var softmax(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  expect_rank(xv, 1, "softmax", "x");
  const double mx = *std::max_element(xv.values().begin(), xv.values().end());
  Tensor y(xv.shape());
  double z = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = std::exp(xv[i] - mx);
    z += y[i];
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= z;
  Tensor y_copy = y;
  return g.record(std::move(y), g.requires_grad(x), [x, y = std::move(y_copy)](const Tensor& gy, Graph& gr) {
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += gy[i] * y[i];
    Tensor* gx = gr.grad_sink(x);
    for (std::size_t i = 0; i < y.size(); ++i) (*gx)[i] += y[i] * (gy[i] - dot);
  });
}

Var concat(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  expect_rank(av, 1, "concat", "a");
  expect_rank(bv, 1, "concat", "b");
  const std::size_t na = av.size();
  Tensor y({na + bv.size()});
  std::copy(av.values().begin(), av.values().end(), y.values().begin());
  std::copy(bv.values().begin(), bv.values().end(), y.values().begin() + na);
  return g.record(std::move(y), any_grad(g, {a, b}), [a, b, na](const Tensor& gy, Graph& gr) {
    if (Tensor* ga = gr.grad_sink(a)) {
      for (std::size_t i = 0; i < na; ++i) (*ga)[i] += gy[i];
    }
    if (Tensor* gb = gr.grad_sink(b)) {
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += gy[na + i];
    }
  });
}

Var row(Graph& g, Var X, std::size_t r) {
  const Tensor& xv = g.value(X);
  expect_rank(xv, 2, "row", "X");
  if (r >= xv.dim(0)) throw DimensionError("row: index " + std::to_string(r) + " outside " + shape_string(xv.shape()));
  auto src = xv.row(r);
  Tensor y({src.size()}, std::vector<double>(src.begin(), src.end()));
  return g.record(std::move(y), g.requires_grad(X), [X, r](const Tensor& gy, Graph& gr) {
    auto dst = gr.grad_sink(X)->row(r);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gy[i];
  });
}

Var stack_rows(Graph& g, std::span<const Var> rows) {
  if (rows.empty()) throw EmptySequenceError("stack_rows: no rows");
  const std::size_t cols = g.value(rows[0]).size();
  Tensor y({rows.size(), cols});
  bool needs = false;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& v = g.value(rows[r]);
    expect_rank(v, 1, "stack_rows", "row");
    if (v.size() != cols) throw DimensionError("stack_rows: rows differ in width");
    std::copy(v.values().begin(), v.values().end(), y.row(r).begin());
    needs = needs || g.requires_grad(rows[r]);
  }
  std::vector<Var> inputs(rows.begin(), rows.end());
  return g.record(std::move(y), needs, [inputs = std::move(inputs)](const Tensor& gy, Graph& gr) {
    for (std::size_t r = 0; r < inputs.size(); ++r) {
      if (Tensor* gv = gr.grad_sink(inputs[r])) {
        auto src = gy.row(r);
        for (std::size_t i = 0; i < src.size(); ++i) (*gv)[i] += src[i];
      }
    }
  });
}

Var flatten(Graph& g, Var X) {
  const Tensor& xv = g.value(X);
  Tensor y({xv.size()}, std::vector<double>(xv.values().begin(), xv.values().end()));
  return g.record(std::move(y), g.requires_grad(X), [X](const Tensor& gy, Graph& gr) {
    Tensor* gx = gr.grad_sink(X);
    for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i];
  });
}

Var temporal_conv(Graph& g, Var X, Var K, Var b) {
  const Tensor& xv = g.value(X);
  const Tensor& kv = g.value(K);
  const Tensor& bv = g.value(b);
  expect_rank(xv, 2, "temporal_conv", "X");
  expect_rank(kv, 3, "temporal_conv", "K");
  expect_rank(bv, 1, "temporal_conv", "b");
  if (kv.dim(1) != xv.dim(1)) {
    throw DimensionError("temporal_conv: kernel " + shape_string(kv.shape()) + " does not accept input " +
                         shape_string(xv.shape()));
  }
  if (bv.dim(0) != kv.dim(2)) {
    throw DimensionError("temporal_conv: bias " + shape_string(bv.shape()) + " does not match kernel " +
                         shape_string(kv.shape()));
  }
  if (kv.dim(0) % 2 == 0) throw DimensionError("temporal_conv: kernel width must be odd");
  const kernels::ConvDims dims{xv.dim(0), xv.dim(1), kv.dim(2), kv.dim(0)};
  Tensor y({dims.frames, dims.out});
  kernels::conv_forward(dims, xv.values(), kv.values(), bv.values(), y.values());
  return g.record(std::move(y), any_grad(g, {X, K, b}), [X, K, b, dims](const Tensor& gy, Graph& gr) {
    if (Tensor* gx = gr.grad_sink(X)) kernels::conv_backward_input(dims, gr.value(K).values(), gy.values(), gx->values());
    if (Tensor* gk = gr.grad_sink(K)) kernels::conv_backward_kernel(dims, gr.value(X).values(), gy.values(), gk->values());
    if (Tensor* gb = gr.grad_sink(b)) kernels::conv_backward_bias(dims, gy.values(), gb->values());
  });
}

Var temporal_maxpool(Graph& g, Var X, std::size_t width, std::size_t stride) {
  if (width == 0 || stride == 0) throw ValidationError("temporal_maxpool: width and stride must be positive");
  const Tensor& xv = g.value(X);
  expect_rank(xv, 2, "temporal_maxpool", "X");
  const std::size_t T = xv.dim(0);
  const std::size_t d = xv.dim(1);
  const std::size_t out_T = (T + stride - 1) / stride;
  Tensor y({out_T, d});
  std::vector<std::size_t> argmax(out_T * d);
  for (std::size_t t = 0; t < out_T; ++t) {
    const std::size_t begin = t * stride;
    const std::size_t end = std::min(T, begin + width);
    for (std::size_t c = 0; c < d; ++c) {
      std::size_t best = begin;
      for (std::size_t s = begin + 1; s < end; ++s) {
        if (xv.at(s, c) > xv.at(best, c)) best = s;
      }
      y.at(t, c) = xv.at(best, c);
      argmax[t * d + c] = best;
    }
  }
  return g.record(std::move(y), g.requires_grad(X), [X, d, argmax = std::move(argmax)](const Tensor& gy, Graph& gr) {
    Tensor* gx = gr.grad_sink(X);
    for (std::size_t k = 0; k < argmax.size(); ++k) (*gx)[argmax[k] * d + k % d] += gy[k];
  });
}

Var sigmoid_cross_entropy(Graph& g, Var logits, const Tensor& target) {
  const Tensor& z = g.value(logits);
  expect_rank(z, 1, "sigmoid_cross_entropy", "logits");
  if (target.shape() != z.shape()) {
    throw ValidationError("sigmoid_cross_entropy: target " + shape_string(target.shape()) +
                          " does not match logits " + shape_string(z.shape()));
  }
  std::size_t ones = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 1.0) {
      ++ones;
    } else if (target[i] != 0.0) {
      ones = 2;
      break;
    }
  }
  if (ones != 1) throw ValidationError("sigmoid_cross_entropy: target is not one-hot");
  // -y log s(z) - (1-y) log(1-s(z)) = softplus(z) - y z
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) loss += softplus(z[i]) - target[i] * z[i];
  return g.record(Tensor({1}, loss), g.requires_grad(logits), [logits, target](const Tensor& gy, Graph& gr) {
    const Tensor& z = gr.value(logits);
    Tensor* gz = gr.grad_sink(logits);
    for (std::size_t i = 0; i < z.size(); ++i) (*gz)[i] += gy[0] * (sigmoid(z[i]) - target[i]);
  });
}

Var softmax_cross_entropy(Graph& g, Var logits, std::size_t target) {
  const Tensor& z = g.value(logits);
  expect_rank(z, 1, "softmax_cross_entropy", "logits");
  if (target >= z.size()) {
    throw ValidationError("softmax_cross_entropy: target index " + std::to_string(target) + " outside [0, " +
                          std::to_string(z.size()) + ")");
  }
  const double mx = *std::max_element(z.values().begin(), z.values().end());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += std::exp(z[i] - mx);
  const double lse = mx + std::log(total);
  return g.record(Tensor({1}, lse - z[target]), g.requires_grad(logits),
                  [logits, target, lse](const Tensor& gy, Graph& gr) {
                    const Tensor& z = gr.value(logits);
                    Tensor* gz = gr.grad_sink(logits);
                    for (std::size_t i = 0; i < z.size(); ++i) {
                      const double p = std::exp(z[i] - lse);
                      (*gz)[i] += gy[0] * (p - (i == target ? 1.0 : 0.0));
                    }
                  });
}

}  // namespace v2c::ops
