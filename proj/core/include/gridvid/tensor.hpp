#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gridvid/errors.hpp"

namespace gridvid::ad {

using Shape = std::vector<size_t>;

size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// One record in the computation graph. Edges point from a node to the nodes
// it was computed from; the backward pass walks them in reverse topological
// order exactly once.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same extent as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parent grads. Leaves have none.
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Value-semantics handle onto a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> value() const { return node_->value; }
  // In-place access for leaf initialization and optimizer updates. Mutating a
  // non-leaf invalidates nothing structurally but is never needed.
  std::span<double> mutable_value() { return node_->value; }

  double item() const;

  // Gradient of the most recent backward pass; empty span if this tensor
  // never participated.
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_node(Shape shape, std::vector<double> value,
                          std::vector<Tensor> parents,
                          std::function<void(Node&)> backprop);
};

// Builds an interior graph node. requires_grad is inherited from parents.
// Custom fused operations (outside this module) are built through this too.
Tensor make_node(Shape shape, std::vector<double> value,
                 std::vector<Tensor> parents,
                 std::function<void(Node&)> backprop);

// Reverse-mode sweep from a scalar root. Gradients accumulate into every
// reachable node with requires_grad set.
void backward(const Tensor& root);

// Debug-build finiteness check; throws ContractError on NaN/Inf.
void check_finite(std::span<const double> data, const char* what);

}  // namespace gridvid::ad
