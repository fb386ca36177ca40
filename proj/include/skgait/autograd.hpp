#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "skgait/tensor.hpp"

namespace skgait {

// Handle to a node of a Graph.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

enum class GradMode { record, inference };

// Tape of one forward pass. Nodes are appended in evaluation order and
// backward() walks them in reverse, so gradients are accumulated in a fixed
// order for a fixed program.
template <typename Real>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, Var self)>;

  explicit Graph(GradMode mode = GradMode::record, bool check_finite = std::is_same_v<Real, double>)
      : mode_(mode), check_finite_(check_finite) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<Real> value) { return push(std::move(value), false, nullptr, nullptr); }
  Var parameter(Parameter<Real>& p) {
    return push(p.value, mode_ == GradMode::record, nullptr, &p);
  }
  // Same value, no gradient flows back through it.
  Var detach(Var v) { return constant(value(v)); }

  // Adds an op result. The node requires grad iff any input does; `fn` is
  // dropped otherwise.
  Var record(Tensor<Real> value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
  }
  Var record(Tensor<Real> value, const std::vector<Var>& inputs, BackwardFn fn) {
    bool rg = false;
    for (Var in : inputs) rg = rg || node(in).requires_grad;
    if (check_finite_ && !value.all_finite()) throw ShapeError("non-finite value produced in verify mode");
    return push(std::move(value), rg, rg ? std::move(fn) : nullptr, nullptr);
  }

  const Tensor<Real>& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  // Gradient of the last backward() w.r.t. v; zeros when nothing reached v.
  const Tensor<Real>& grad(Var v) {
    Node& n = node(v);
    if (n.grad.empty()) n.grad = Tensor<Real>(n.value.shape());
    return n.grad;
  }
  // Accumulation target for backward functions.
  Tensor<Real>& grad_mut(Var v) {
    Node& n = node(v);
    if (n.grad.empty()) n.grad = Tensor<Real>(n.value.shape());
    return n.grad;
  }
  bool has_grad(Var v) const { return !node(v).grad.empty(); }

  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates. Parameter gradients are
  // accumulated into Parameter::grad.
  void backward(Var loss) {
    if (nodes_.empty() || !loss.valid() || loss.id >= nodes_.size())
      throw GraphStateError("backward() called without a recorded forward pass");
    if (backward_done_) throw GraphStateError("backward() already ran on this graph");
    if (mode_ != GradMode::record) throw GraphStateError("backward() on an inference-mode graph");
    if (node(loss).value.size() != 1) throw GraphStateError("backward() needs a scalar loss");
    backward_done_ = true;
    grad_mut(loss)[0] = Real(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.param) {
        auto& pg = n.param->grad;
        if (pg.shape() != n.grad.shape()) pg = Tensor<Real>(n.grad.shape());
        for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
      } else if (n.backward) {
        n.backward(*this, Var{i});
      }
    }
  }

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter<Real>* param = nullptr;
  };

  Var push(Tensor<Real> value, bool rg, BackwardFn fn, Parameter<Real>* p) {
    nodes_.push_back(Node{std::move(value), {}, rg, std::move(fn), p});
    return Var{nodes_.size() - 1};
  }
  Node& node(Var v) {
    if (!v.valid() || v.id >= nodes_.size()) throw GraphStateError("invalid graph handle");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (!v.valid() || v.id >= nodes_.size()) throw GraphStateError("invalid graph handle");
    return nodes_[v.id];
  }

  GradMode mode_;
  bool check_finite_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
};

}  // namespace skgait
