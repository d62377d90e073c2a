#pragma once

#include <cstddef>
#include <span>

#include "v2c/graph.hpp"

// Differentiable primitives. Each op records its output on the graph together
// with the closure that maps the output gradient onto its inputs.
namespace v2c::ops {

// Scalar helpers in numerically stable form.
double sigmoid(double x);
// log(1 + exp(x)) without overflow.
double softplus(double x);

// y = W x + b with x [d_in], W [d_out x d_in], b [d_out].
Var affine(Graph& g, Var x, Var W, Var b);
// Wx x + Wh h + b; the pre-activation of one recurrent gate.
Var gate(Graph& g, Var Wx, Var x, Var Wh, Var h, Var b);

Var add(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var one_minus(Graph& g, Var a);
Var scale(Graph& g, Var a, double factor);
Var sum(Graph& g, Var a);
// Sum of scalar nodes.
Var add_n(Graph& g, std::span<const Var> scalars);

Var sigmoid(Graph& g, Var x);
Var tanh_act(Graph& g, Var x);
Var relu(Graph& g, Var x);
Var softmax(Graph& g, Var x);

// Vector concatenation [a ; b].
Var concat(Graph& g, Var a, Var b);
Var row(Graph& g, Var X, std::size_t r);
Var stack_rows(Graph& g, std::span<const Var> rows);
Var flatten(Graph& g, Var X);

// X [T x d_in], K [w x d_in x d_out], b [d_out] -> [T x d_out], zero same-padding, odd w.
Var temporal_conv(Graph& g, Var X, Var K, Var b);
// X [T x d] -> [ceil(T/stride) x d]; window t covers [t*stride, t*stride+width) clipped to T.
Var temporal_maxpool(Graph& g, Var X, std::size_t width, std::size_t stride);

// Sum over classes of binary cross-entropy on sigmoid(logits); target must be one-hot.
Var sigmoid_cross_entropy(Graph& g, Var logits, const Tensor& target);
// -log softmax(logits)[target].
Var softmax_cross_entropy(Graph& g, Var logits, std::size_t target);

}  // namespace v2c::ops
