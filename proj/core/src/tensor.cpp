#include "semcom/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "semcom/error.hpp"

namespace semcom {

namespace {
thread_local bool t_grad_enabled = true;

const char* kModule = "tensor-core";
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, real value, bool requires_grad) {
  std::vector<real> data(shape_numel(shape), value);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<real> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError(kModule, "shape " + shape_str(shape) + " does not hold " +
                                  std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(real value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= ndim()) {
    throw ShapeError(kModule, "axis " + std::to_string(axis) + " out of range for " +
                                  shape_str(shape()));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const real> Tensor::data() const { return node_->data; }
std::span<real> Tensor::mutable_data() { return node_->data; }

real Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError(kModule, "item() on tensor of shape " + shape_str(shape()));
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  if (!flag) node_->grad.clear();
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const real> Tensor::grad() const { return node_->grad; }

std::span<real> Tensor::mutable_grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->requires_grad) return;
  node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::clone() const {
  return from_data(node_->shape, node_->data, node_->requires_grad);
}

Tensor Tensor::detach() const { return from_data(node_->shape, node_->data, false); }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace detail {

Tensor make_result(Shape shape, std::vector<real> data, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  if (t_grad_enabled) {
    bool any = std::any_of(parents.begin(), parents.end(),
                           [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p.node());
      node->backward = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

std::span<real> grad_sink(const std::shared_ptr<Node>& parent) {
  if (!parent->requires_grad) return {};
  if (parent->grad.empty()) parent->grad.assign(parent->data.size(), 0.0);
  return parent->grad;
}

}  // namespace detail

void backward(const Tensor& scalar_loss) {
  if (!scalar_loss.defined() || scalar_loss.numel() != 1) {
    throw ShapeError(kModule, "backward() needs a single-element loss, got " +
                                  (scalar_loss.defined() ? shape_str(scalar_loss.shape())
                                                         : std::string("undefined")));
  }
  auto root = scalar_loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are per-pass scratch; leaf gradients accumulate.
  for (auto* node : order) {
    if (node->backward) {
      node->grad.assign(node->data.size(), 0.0);
    } else if (node->grad.empty()) {
      node->grad.assign(node->data.size(), 0.0);
    }
  }
  root->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward) node->backward(*node);
  }
}

}  // namespace semcom
