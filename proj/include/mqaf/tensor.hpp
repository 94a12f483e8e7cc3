#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mqaf/errors.hpp"

namespace mqaf {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

namespace detail {

// One node of the recorded computation. Nodes are created in execution
// order; `seq` is the record index. Replaying `backward_fn` over reachable
// nodes in decreasing `seq` is reverse-mode differentiation: every node is
// visited exactly once and parent gradients accumulate additively.
struct TensorNode {
  Shape shape;
  std::shared_ptr<std::vector<double>> values;
  std::vector<double> grad;  // empty until backward (or ensure_grad) touches it
  bool requires_grad = false;
  std::uint64_t seq = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Accumulates this node's grad into the grads of its parents.
  std::function<void(TensorNode&)> backward_fn;

  std::size_t numel() const { return values->size(); }
  void ensure_grad() {
    if (grad.size() != values->size()) grad.assign(values->size(), 0.0);
  }
};

using NodePtr = std::shared_ptr<TensorNode>;

NodePtr make_leaf(Shape shape, std::vector<double> values, bool requires_grad);

// Builds an op node. requires_grad is inherited from the parents; when no
// parent requires grad the parents and closure are dropped so inference
// builds no graph at all.
NodePtr make_op(const char* op, Shape shape, std::vector<double> values,
                std::vector<NodePtr> parents,
                std::function<void(TensorNode&)> backward_fn);

}  // namespace detail

// Dense array participating in a differentiation graph. Value semantics on
// the handle: copies alias the same node.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->numel(); }
  std::size_t rank() const { return node_->shape.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }

  const std::vector<double>& values() const { return *node_->values; }
  // Direct in-place access for optimizers and loaders; never recorded.
  std::vector<double>& mutable_values() { return *node_->values; }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  // Drops the accumulator entirely: has_grad() answers "did any backward
  // reach this tensor since the last zero_grad".
  void zero_grad() { node_->grad.clear(); }

  double item() const;

  // Reverse-mode propagation from this scalar into every requires_grad
  // ancestor. Gradients accumulate until zero_grad.
  void backward() const;

  const detail::NodePtr& node() const { return node_; }

 private:
  detail::NodePtr node_;
};

}  // namespace mqaf
