#include "gridvid/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace gridvid::ad {

size_t numel(const Shape& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void check_finite(std::span<const double> data, const char* what) {
#ifndef NDEBUG
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw ContractError(std::string("non-finite value in ") + what);
    }
  }
#else
  (void)data;
  (void)what;
#endif
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value.assign(numel(shape), fill);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != data.size()) {
    throw DimensionError("from_data: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
  }
  check_finite(data, "leaf tensor");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
  }
  return node_->value[0];
}

Tensor make_node(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                 std::function<void(Node&)> backprop) {
  if (numel(shape) != value.size()) {
    throw DimensionError("make_node: shape/value mismatch");
  }
  check_finite(value, "op result");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->parents.reserve(parents.size());
  for (const auto& p : parents) {
    n->requires_grad = n->requires_grad || p.requires_grad();
    n->parents.push_back(p.node());
  }
  if (n->requires_grad) n->backprop = std::move(backprop);
  return Tensor(std::move(n));
}

void backward(const Tensor& root) {
  if (!root.defined() || root.size() != 1) {
    throw ContractError("backward requires a defined scalar root");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS over grad-requiring ancestry; reversing the
  // post-order yields the processing order (each node before its parents).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.node().get(), 0});
  visited.insert(root.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  Node* r = root.node().get();
  r->ensure_grad();
  r->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

}  // namespace gridvid::ad
