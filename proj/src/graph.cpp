#include "v2c/graph.hpp"

#include "v2c/error.hpp"

namespace v2c {

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, nullptr, {}});
  return Var{nodes_.size() - 1};
}

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
  nodes_.push_back(Node{p.value, {}, true, false, &p, {}});
  const std::size_t id = nodes_.size() - 1;
  param_nodes_.emplace(&p, id);
  return Var{id};
}

Var Graph::record(Tensor value, bool requires_grad, BackwardFn fn) {
  if (consumed_) throw StateError("graph already differentiated; build a new one");
  nodes_.push_back(Node{std::move(value), {}, requires_grad, false, nullptr,
                        requires_grad ? std::move(fn) : BackwardFn{}});
  return Var{nodes_.size() - 1};
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw StateError("variable does not belong to this graph");
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

double Graph::scalar(Var v) const {
  const auto& t = node(v).value;
  if (t.size() != 1) throw DimensionError("expected a scalar, got shape " + shape_string(t.shape()));
  return t[0];
}

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor* Graph::grad_sink(Var v) {
  if (v.id >= nodes_.size()) throw StateError("variable does not belong to this graph");
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return &n.grad;
}

void Graph::backward(Var root) {
  if (nodes_.empty() || !root.valid()) throw StateError("backward called without a forward pass");
  if (root.id >= nodes_.size()) throw StateError("backward root does not belong to this graph");
  if (consumed_) throw StateError("backward already ran on this graph");
  if (nodes_[root.id].value.size() != 1) {
    throw DimensionError("backward root must be a scalar, got " +
                         shape_string(nodes_[root.id].value.shape()));
  }
  consumed_ = true;
  Tensor* seed = grad_sink(root);
  if (seed == nullptr) return;  // loss does not depend on any parameter
  (*seed)[0] = 1.0;

  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.param != nullptr) {
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    } else if (n.backward) {
      n.backward(n.grad, *this);
    }
  }
}

}  // namespace v2c
