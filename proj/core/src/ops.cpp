#include "semcom/ops.hpp"

#include <Eigen/Core>
#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

namespace {

const char* kModule = "tensor-core";

using detail::grad_sink;
using detail::make_result;
using detail::Node;

using RowMatrix = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.defined() || !b.defined()) {
    throw ShapeError(kModule, std::string(op) + ": missing operand");
  }
  if (a.shape() != b.shape()) {
    throw ShapeError(kModule, std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                                  shape_str(b.shape()) + " differ");
  }
}

void require_ndim(const Tensor& t, std::size_t n, const char* op) {
  if (!t.defined() || t.ndim() != n) {
    throw ShapeError(kModule, std::string(op) + ": expected " + std::to_string(n) +
                                  "-D tensor, got " +
                                  (t.defined() ? shape_str(t.shape()) : std::string("none")));
  }
}

template <typename F, typename D>
Tensor unary(const Tensor& x, F forward, D derivative_from_output) {
  const auto in = x.data();
  std::vector<real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [derivative_from_output](Node& self) {
    auto gx = grad_sink(self.parents[0]);
    if (gx.empty()) return;
    const auto& xin = self.parents[0]->data;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += self.grad[i] * derivative_from_output(xin[i], self.data[i]);
    }
  });
}

real sigmoid_value(real v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const real e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
  return unary(x, sigmoid_value, [](real, real y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](real v) { return std::tanh(v); }, [](real, real y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](real v) { return v > 0 ? v : 0.0; }, [](real v, real) { return v > 0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, [](real v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](real v, real) { return sigmoid_value(v); });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](real v) { return v * v; }, [](real v, real) { return 2.0 * v; });
}

Tensor scale(const Tensor& x, real factor) {
  return unary(
      x, [factor](real v) { return v * factor; }, [factor](real, real) { return factor; });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto da = a.data();
  const auto db = b.data();
  std::vector<real> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      auto g = grad_sink(self.parents[p]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto da = a.data();
  const auto db = b.data();
  std::vector<real> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    auto ga = grad_sink(self.parents[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    auto gb = grad_sink(self.parents[1]);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto da = a.data();
  const auto db = b.data();
  std::vector<real> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& va = self.parents[0]->data;
    const auto& vb = self.parents[1]->data;
    auto ga = grad_sink(self.parents[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * vb[i];
    auto gb = grad_sink(self.parents[1]);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * va[i];
  });
}

Tensor pointwise(PointwiseKind kind, const Tensor& lhs, const Tensor& rhs, real factor) {
  if (!lhs.defined()) throw ShapeError(kModule, "pointwise: missing operand");
  switch (kind) {
    case PointwiseKind::sigmoid: return sigmoid(lhs);
    case PointwiseKind::tanh: return tanh(lhs);
    case PointwiseKind::relu: return relu(lhs);
    case PointwiseKind::add: return add(lhs, rhs);
    case PointwiseKind::sub: return sub(lhs, rhs);
    case PointwiseKind::mul: return mul(lhs, rhs);
    case PointwiseKind::scale: return scale(lhs, factor);
  }
  throw DomainError(kModule, "pointwise: unknown kind");
}

Tensor sum(const Tensor& x) {
  real total = 0;
  for (real v : x.data()) total += v;
  return make_result({}, {total}, {x}, [](Node& self) {
    auto g = grad_sink(self.parents[0]);
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError(kModule, "mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<real>(x.numel()));
}

Tensor row_sum(const Tensor& x) {
  require_ndim(x, 2, "row_sum");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const auto d = x.data();
  std::vector<real> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    real acc = 0;
    for (std::size_t c = 0; c < cols; ++c) acc += d[r * cols + c];
    out[r] = acc;
  }
  return make_result({rows}, std::move(out), {x}, [rows, cols](Node& self) {
    auto g = grad_sink(self.parents[0]);
    if (g.empty()) return;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError(kModule, "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<real> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    auto g = grad_sink(self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor row(const Tensor& x, std::size_t index) {
  require_ndim(x, 2, "row");
  const std::size_t cols = x.dim(1);
  if (index >= x.dim(0)) {
    throw ShapeError(kModule, "row " + std::to_string(index) + " of " + shape_str(x.shape()));
  }
  const auto d = x.data();
  std::vector<real> out(d.begin() + index * cols, d.begin() + (index + 1) * cols);
  return make_result({1, cols}, std::move(out), {x}, [index, cols](Node& self) {
    auto g = grad_sink(self.parents[0]);
    if (g.empty()) return;
    for (std::size_t c = 0; c < cols; ++c) g[index * cols + c] += self.grad[c];
  });
}

Tensor slice_first(const Tensor& x, std::size_t begin, std::size_t end) {
  if (!x.defined() || x.ndim() == 0 || begin >= end || end > x.dim(0)) {
    throw ShapeError(kModule, "slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                  ") of " + (x.defined() ? shape_str(x.shape()) : "none"));
  }
  const std::size_t stride = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  const auto d = x.data();
  std::vector<real> out(d.begin() + begin * stride, d.begin() + end * stride);
  const std::size_t offset = begin * stride;
  return make_result(std::move(shape), std::move(out), {x}, [offset](Node& self) {
    auto g = grad_sink(self.parents[0]);
    if (g.empty()) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError(kModule, "concat_rows: no inputs");
  const std::size_t cols = parts.front().ndim() == 2 ? parts.front().dim(1) : 0;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_ndim(p, 2, "concat_rows");
    if (p.dim(1) != cols) {
      throw ShapeError(kModule, "concat_rows: column mismatch " + shape_str(p.shape()));
    }
    rows += p.dim(0);
  }
  std::vector<real> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result({rows, cols}, std::move(out), parts, [](Node& self) {
    std::size_t offset = 0;
    for (auto& parent : self.parents) {
      const std::size_t n = parent->data.size();
      auto g = grad_sink(parent);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset + i];
      offset += n;
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_ndim(a, 2, "matmul");
  require_ndim(b, 2, "matmul");
  const auto n = static_cast<Eigen::Index>(a.dim(0));
  const auto d = static_cast<Eigen::Index>(a.dim(1));
  const auto e = static_cast<Eigen::Index>(b.dim(1));
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError(kModule, "matmul: inner dimensions of " + shape_str(a.shape()) + " and " +
                                  shape_str(b.shape()) + " disagree");
  }
  std::vector<real> out(static_cast<std::size_t>(n * e));
  MatMap(out.data(), n, e).noalias() = ConstMatMap(a.data().data(), n, d) *
                                       ConstMatMap(b.data().data(), d, e);
  return make_result({a.dim(0), b.dim(1)}, std::move(out), {a, b}, [n, d, e](Node& self) {
    ConstMatMap grad_out(self.grad.data(), n, e);
    auto ga = grad_sink(self.parents[0]);
    if (!ga.empty()) {
      MatMap(ga.data(), n, d).noalias() +=
          grad_out * ConstMatMap(self.parents[1]->data.data(), d, e).transpose();
    }
    auto gb = grad_sink(self.parents[1]);
    if (!gb.empty()) {
      MatMap(gb.data(), d, e).noalias() +=
          ConstMatMap(self.parents[0]->data.data(), n, d).transpose() * grad_out;
    }
  });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_ndim(x, 2, "add_row_bias");
  require_ndim(bias, 1, "add_row_bias");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (bias.dim(0) != cols) {
    throw ShapeError(kModule, "add_row_bias: bias " + shape_str(bias.shape()) + " vs input " +
                                  shape_str(x.shape()));
  }
  std::vector<real> out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += b[c];
  return make_result(x.shape(), std::move(out), {x, bias}, [rows, cols](Node& self) {
    auto gx = grad_sink(self.parents[0]);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    auto gb = grad_sink(self.parents[1]);
    if (gb.empty()) return;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) gb[c] += self.grad[r * cols + c];
  });
}

Tensor scale_columns(const Tensor& x, const Tensor& weights) {
  require_ndim(x, 2, "scale_columns");
  require_ndim(weights, 1, "scale_columns");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (weights.dim(0) != cols) {
    throw ShapeError(kModule, "scale_columns: weights " + shape_str(weights.shape()) +
                                  " vs input " + shape_str(x.shape()));
  }
  std::vector<real> out(x.data().begin(), x.data().end());
  const auto w = weights.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] *= w[c];
  return make_result(x.shape(), std::move(out), {x, weights}, [rows, cols](Node& self) {
    const auto& xv = self.parents[0]->data;
    const auto& wv = self.parents[1]->data;
    auto gx = grad_sink(self.parents[0]);
    if (!gx.empty()) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += self.grad[r * cols + c] * wv[c];
    }
    auto gw = grad_sink(self.parents[1]);
    if (!gw.empty()) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gw[c] += self.grad[r * cols + c] * xv[r * cols + c];
    }
  });
}

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  return add_row_bias(matmul(input, weight), bias);
}

Tensor dropout(const Tensor& input, real rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw DomainError(kModule, "dropout rate " + std::to_string(rate) + " outside [0, 1)");
  }
  if (!training || rate == 0.0) return input;
  const real keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution drop(rate);
  std::vector<real> mask(input.numel());
  for (auto& m : mask) m = drop(rng) ? 0.0 : keep_scale;
  const auto in = input.data();
  std::vector<real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * mask[i];
  return make_result(input.shape(), std::move(out), {input},
                     [mask = std::move(mask)](Node& self) {
                       auto g = grad_sink(self.parents[0]);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
                     });
}

Tensor uniform(Shape shape, real low, real high, Rng& rng, bool requires_grad) {
  std::uniform_real_distribution<real> dist(low, high);
  std::vector<real> data(shape_numel(shape));
  for (auto& v : data) v = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor normal(Shape shape, real mean_value, real stddev, Rng& rng, bool requires_grad) {
  std::normal_distribution<real> dist(mean_value, stddev);
  std::vector<real> data(shape_numel(shape));
  for (auto& v : data) v = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

}  // namespace semcom
