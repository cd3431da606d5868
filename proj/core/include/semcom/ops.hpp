#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

using Rng = std::mt19937_64;

// ---- elementwise ------------------------------------------------------------

enum class PointwiseKind { sigmoid, tanh, relu, add, sub, mul, scale };

/// Dispatches an elementwise op. Binary kinds (add, sub, mul) need `rhs` of the
/// identical shape; `scale` multiplies `lhs` by `factor`.
Tensor pointwise(PointwiseKind kind, const Tensor& lhs, const Tensor& rhs = {},
                 real factor = 1.0);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
/// log(1 + e^x), computed without overflow.
Tensor softplus(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, real factor);
Tensor square(const Tensor& x);

// ---- reductions and reshaping ----------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// [N, D] -> [N]
Tensor row_sum(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
/// Row `index` of a 2-D tensor as a [1, D] tensor.
Tensor row(const Tensor& x, std::size_t index);
/// Rows [begin, end) along the first axis of any tensor with ndim >= 1.
Tensor slice_first(const Tensor& x, std::size_t begin, std::size_t end);
/// Stacks 2-D tensors with equal column counts along the first axis.
Tensor concat_rows(const std::vector<Tensor>& parts);

// ---- dense layers -----------------------------------------------------------

/// [N, D] x [D, E] -> [N, E]
Tensor matmul(const Tensor& a, const Tensor& b);
/// Adds a length-E bias to every row of [N, E].
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
/// Multiplies every row of [N, E] elementwise by a length-E vector.
Tensor scale_columns(const Tensor& x, const Tensor& weights);
/// x W + b with x [N, D], W [D, E], b [E].
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias);

// ---- convolutional layers ---------------------------------------------------

/// input [N, C, H, W], kernel [F, C, kh, kw] -> [N, F, H', W'] with
/// H' = (H + 2 padding - dilation (kh - 1) - 1) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride = 1, int dilation = 1,
              int padding = 0);

/// input [N, C, H, W], kernel [C, F, kh, kw] -> [N, F, (H-1) stride - 2 padding + kh, ...].
/// This is the adjoint of conv2d with the same kernel (dilation 1).
Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, int stride = 1,
                         int padding = 0);

/// Adds bias[c] to every pixel of channel c of [N, C, H, W].
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

/// Non-overlapping or strided max pooling without padding. Ties route the
/// gradient to the first element in row-major scan order.
Tensor max_pool2d(const Tensor& input, int window, int stride);

// ---- regularisation ---------------------------------------------------------

/// Inverted dropout: in training each element is zeroed with probability
/// `rate` and survivors are scaled by 1 / (1 - rate). Identity otherwise.
Tensor dropout(const Tensor& input, real rate, bool training, Rng& rng);

// ---- initialisation helpers -------------------------------------------------

Tensor uniform(Shape shape, real low, real high, Rng& rng, bool requires_grad = false);
Tensor normal(Shape shape, real mean, real stddev, Rng& rng, bool requires_grad = false);

}  // namespace semcom
