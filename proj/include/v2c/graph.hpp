#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>

#include "v2c/tensor.hpp"

namespace v2c {

// Trainable array with its gradient accumulator.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Shape shape) : name(std::move(name)), value(shape), grad(shape) {}

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Tensor value;
  Tensor grad;
};

// Handle to a node recorded on a Graph.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const noexcept { return id != npos; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, which is a
// topological order, so backward() is a single reverse sweep. A graph is
// single-use: backward() may run once.
class Graph {
 public:
  // Receives the gradient flowing into this node's output.
  using BackwardFn = std::function<void(const Tensor& out_grad, Graph& g)>;

  Var constant(Tensor value);
  // Leaf bound to a parameter; repeated calls for the same parameter share one node.
  Var param(Parameter& p);

  // Used by op implementations. `requires_grad` is true when any input needs a gradient.
  Var record(Tensor value, bool requires_grad, BackwardFn fn);

  const Tensor& value(Var v) const;
  double scalar(Var v) const;
  bool requires_grad(Var v) const;
  // Mutable gradient buffer of an input, allocated on first use. Null when no gradient is needed.
  Tensor* grad_sink(Var v);

  std::size_t size() const noexcept { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 and accumulates into every reachable Parameter::grad.
  void backward(Var root);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> param_nodes_;
  bool consumed_ = false;
};

}  // namespace v2c
