#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace semcom {

// Project-wide scalar type. Gradient-check tolerances (1e-4 relative) are
// calibrated for double precision.
using real = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {

struct Node {
  Shape shape;
  std::vector<real> data;
  std::vector<real> grad;  // empty until a backward pass or zero_grad touches it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward;
};

}  // namespace detail

/// Dense row-major tensor handle with an optional gradient slot.
///
/// Copies share storage (like a reference); use `clone()` for a deep copy.
/// Operations on tensors that require grad are recorded so that
/// `backward()` can propagate d(loss)/d(tensor) to every leaf in the graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, real value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<real> data, bool requires_grad = false);
  static Tensor scalar(real value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const real> data() const;
  std::span<real> mutable_data();
  real item() const;
  real at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const real> grad() const;
  std::span<real> mutable_grad();
  void zero_grad();

  /// Deep copy of the values, detached from any graph.
  Tensor clone() const;
  /// Copy of the values with no history; never requires grad.
  Tensor detach() const;

  // Internal: used by ops to build graph nodes.
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Back-propagates from a single-element loss. Leaf gradients accumulate
/// across calls until `zero_grad()`.
void backward(const Tensor& scalar_loss);

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

// Builds an op result. Graph edges and the backward closure are kept only when
// grad mode is on and some parent requires grad.
Tensor make_result(Shape shape, std::vector<real> data, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn);

// Grad buffer of a parent, or an empty span when the parent does not need one.
std::span<real> grad_sink(const std::shared_ptr<Node>& parent);

}  // namespace detail

}  // namespace semcom
