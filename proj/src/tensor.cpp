#include "mqaf/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

namespace mqaf {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

namespace detail {

namespace {
std::atomic<std::uint64_t> g_seq{0};
}

NodePtr make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->values = std::make_shared<std::vector<double>>(std::move(values));
  n->requires_grad = requires_grad;
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  return n;
}

NodePtr make_op(const char* op, Shape shape, std::vector<double> values,
                std::vector<NodePtr> parents,
                std::function<void(TensorNode&)> backward_fn) {
  bool needs_grad = false;
  for (const auto& p : parents)
    if (p && p->requires_grad) needs_grad = true;

  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->values = std::make_shared<std::vector<double>>(std::move(values));
  n->op = op;
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  n->requires_grad = needs_grad;
  if (needs_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

}  // namespace detail

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(detail::make_leaf(std::move(shape), std::move(values), requires_grad)) {}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Shape{}, {v}, requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), 0.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), fill);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty())
    throw Error("grad: no gradient present on this tensor (op=" +
                std::string(node_->op) + ")");
  return node_->grad;
}

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item: tensor has shape " + shape_str(shape()) +
                     ", expected a single element");
  return (*node_->values)[0];
}

void Tensor::backward() const {
  if (!defined()) throw Error("backward: undefined tensor");
  if (numel() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_str(shape()));
  if (!node_->requires_grad) return;  // constant loss, nothing reachable

  // Collect the reachable requires_grad subgraph.
  std::vector<detail::TensorNode*> order;
  std::unordered_set<detail::TensorNode*> seen;
  std::vector<detail::TensorNode*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    detail::TensorNode* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p && p->requires_grad && seen.insert(p.get()).second)
        stack.push_back(p.get());
    }
  }
  // Reverse record order is a reverse topological order: parents are always
  // recorded before the ops that consume them.
  std::sort(order.begin(), order.end(),
            [](const detail::TensorNode* a, const detail::TensorNode* b) {
              return a->seq > b->seq;
            });

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (detail::TensorNode* n : order) {
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace mqaf
