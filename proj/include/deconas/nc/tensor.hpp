#pragma once

// Reverse-mode autodiff tensor. A Tensor is a handle to a graph node; ops
// create new nodes that remember their parents and a backward closure.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace deconas::nc {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches the node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Allocates a zero gradient on first use.
  std::vector<double>& grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  /// A leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);

  [[nodiscard]] bool defined() const { return static_cast<bool>(node_); }
  [[nodiscard]] const Shape& shape() const { return node_->shape; }
  [[nodiscard]] int dim(std::size_t axis) const { return node_->shape.at(axis); }
  [[nodiscard]] std::size_t rank() const { return node_->shape.size(); }
  [[nodiscard]] std::size_t numel() const { return node_->value.size(); }

  [[nodiscard]] std::span<const double> values() const { return node_->value; }
  /// In-place access for optimizers and tests; does not invalidate graphs.
  [[nodiscard]] std::span<double> mutable_values() const { return node_->value; }
  [[nodiscard]] double item() const;

  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  [[nodiscard]] bool has_grad() const { return !node_->grad.empty(); }
  [[nodiscard]] std::span<const double> grad() const { return node_->grad; }
  void zero_grad() const { node_->grad.clear(); }

  /// Storage identity: two handles alias iff their nodes coincide.
  [[nodiscard]] const Node* id() const { return node_.get(); }
  [[nodiscard]] const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Seeds d(loss)/d(loss) = 1 and propagates through the graph. `loss`
/// must hold exactly one value.
void backward(const Tensor& loss);

/// While alive on this thread, ops record no backward closures.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Builds an op result. The backward closure is dropped, together with the
/// parent references, when no parent needs a gradient.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

/// Debug builds reject NaN/Inf in op outputs.
void check_finite(const Node& node, const char* op);

}  // namespace deconas::nc
