#include <Eigen/Core>

#include "semcom/error.hpp"
#include "semcom/ops.hpp"

namespace semcom {

namespace {

const char* kModule = "tensor-core";

using detail::grad_sink;
using detail::make_result;
using detail::Node;

using RowMatrix = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

// Sliding-window geometry of a convolution from an image of `height x width`
// with `channels` planes to an output of `out_h x out_w`.
struct Window {
  long channels, height, width;
  long kh, kw;
  long stride, padding, dilation;
  long out_h, out_w;

  long rows() const { return channels * kh * kw; }
  long cols() const { return out_h * out_w; }
};

void im2col(const Window& g, const real* image, real* cols) {
  for (long c = 0; c < g.channels; ++c) {
    for (long ki = 0; ki < g.kh; ++ki) {
      for (long kj = 0; kj < g.kw; ++kj) {
        real* dst = cols + ((c * g.kh + ki) * g.kw + kj) * g.cols();
        for (long oy = 0; oy < g.out_h; ++oy) {
          const long iy = oy * g.stride - g.padding + ki * g.dilation;
          for (long ox = 0; ox < g.out_w; ++ox) {
            const long ix = ox * g.stride - g.padding + kj * g.dilation;
            const bool inside = iy >= 0 && iy < g.height && ix >= 0 && ix < g.width;
            dst[oy * g.out_w + ox] = inside ? image[(c * g.height + iy) * g.width + ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const Window& g, const real* cols, real* image) {
  for (long c = 0; c < g.channels; ++c) {
    for (long ki = 0; ki < g.kh; ++ki) {
      for (long kj = 0; kj < g.kw; ++kj) {
        const real* src = cols + ((c * g.kh + ki) * g.kw + kj) * g.cols();
        for (long oy = 0; oy < g.out_h; ++oy) {
          const long iy = oy * g.stride - g.padding + ki * g.dilation;
          if (iy < 0 || iy >= g.height) continue;
          for (long ox = 0; ox < g.out_w; ++ox) {
            const long ix = ox * g.stride - g.padding + kj * g.dilation;
            if (ix < 0 || ix >= g.width) continue;
            image[(c * g.height + iy) * g.width + ix] += src[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

void require_4d(const Tensor& t, const char* op, const char* what) {
  if (!t.defined() || t.ndim() != 4) {
    throw ShapeError(kModule, std::string(op) + ": " + what + " must be 4-D, got " +
                                  (t.defined() ? shape_str(t.shape()) : std::string("none")));
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int dilation, int padding) {
  require_4d(input, "conv2d", "input");
  require_4d(kernel, "conv2d", "kernel");
  if (stride <= 0 || dilation <= 0) {
    throw DomainError(kModule, "conv2d: stride and dilation must be positive");
  }
  if (padding < 0) throw DomainError(kModule, "conv2d: negative padding");
  if (kernel.dim(1) != input.dim(1)) {
    throw ShapeError(kModule, "conv2d: kernel " + shape_str(kernel.shape()) +
                                  " does not match input channels of " +
                                  shape_str(input.shape()));
  }
  const long batch = static_cast<long>(input.dim(0));
  const long filters = static_cast<long>(kernel.dim(0));
  Window g{static_cast<long>(input.dim(1)),
           static_cast<long>(input.dim(2)),
           static_cast<long>(input.dim(3)),
           static_cast<long>(kernel.dim(2)),
           static_cast<long>(kernel.dim(3)),
           stride,
           padding,
           dilation,
           0,
           0};
  if (g.kh < 1 || g.kw < 1) throw ShapeError(kModule, "conv2d: empty kernel");
  const long extent_h = dilation * (g.kh - 1) + 1;
  const long extent_w = dilation * (g.kw - 1) + 1;
  if (extent_h > g.height + 2 * padding || extent_w > g.width + 2 * padding) {
    throw ShapeError(kModule, "conv2d: kernel extent exceeds padded input " +
                                  shape_str(input.shape()));
  }
  g.out_h = (g.height + 2 * padding - extent_h) / stride + 1;
  g.out_w = (g.width + 2 * padding - extent_w) / stride + 1;

  const long in_plane = g.channels * g.height * g.width;
  const long out_plane = filters * g.cols();
  std::vector<real> out(static_cast<std::size_t>(batch * out_plane));
  std::vector<real> cols(static_cast<std::size_t>(g.rows() * g.cols()));
  ConstMatMap kmat(kernel.data().data(), filters, g.rows());
  for (long n = 0; n < batch; ++n) {
    im2col(g, input.data().data() + n * in_plane, cols.data());
    MatMap(out.data() + n * out_plane, filters, g.cols()).noalias() =
        kmat * ConstMatMap(cols.data(), g.rows(), g.cols());
  }

  Shape shape{input.dim(0), kernel.dim(0), static_cast<std::size_t>(g.out_h),
              static_cast<std::size_t>(g.out_w)};
  return make_result(std::move(shape), std::move(out), {input, kernel},
                     [g, batch, filters, in_plane, out_plane](Node& self) {
                       const auto& in = self.parents[0]->data;
                       const auto& kv = self.parents[1]->data;
                       auto gin = grad_sink(self.parents[0]);
                       auto gk = grad_sink(self.parents[1]);
                       std::vector<real> cols(static_cast<std::size_t>(g.rows() * g.cols()));
                       ConstMatMap kmat(kv.data(), filters, g.rows());
                       for (long n = 0; n < batch; ++n) {
                         ConstMatMap gout(self.grad.data() + n * out_plane, filters, g.cols());
                         if (!gk.empty()) {
                           im2col(g, in.data() + n * in_plane, cols.data());
                           MatMap(gk.data(), filters, g.rows()).noalias() +=
                               gout * ConstMatMap(cols.data(), g.rows(), g.cols()).transpose();
                         }
                         if (!gin.empty()) {
                           MatMap(cols.data(), g.rows(), g.cols()).noalias() =
                               kmat.transpose() * gout;
                           col2im(g, cols.data(), gin.data() + n * in_plane);
                         }
                       }
                     });
}

Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, int stride, int padding) {
  require_4d(input, "transposed_conv2d", "input");
  require_4d(kernel, "transposed_conv2d", "kernel");
  if (stride <= 0) throw DomainError(kModule, "transposed_conv2d: stride must be positive");
  if (padding < 0) throw DomainError(kModule, "transposed_conv2d: negative padding");
  if (kernel.dim(0) != input.dim(1)) {
    throw ShapeError(kModule, "transposed_conv2d: kernel " + shape_str(kernel.shape()) +
                                  " does not match input channels of " +
                                  shape_str(input.shape()));
  }
  const long batch = static_cast<long>(input.dim(0));
  const long in_channels = static_cast<long>(input.dim(1));
  const long in_h = static_cast<long>(input.dim(2));
  const long in_w = static_cast<long>(input.dim(3));
  const long filters = static_cast<long>(kernel.dim(1));
  const long kh = static_cast<long>(kernel.dim(2));
  const long kw = static_cast<long>(kernel.dim(3));
  const long out_h = (in_h - 1) * stride - 2 * padding + kh;
  const long out_w = (in_w - 1) * stride - 2 * padding + kw;
  if (kh < 1 || kw < 1 || out_h < 1 || out_w < 1) {
    throw ShapeError(kModule, "transposed_conv2d: empty output for input " +
                                  shape_str(input.shape()) + " and kernel " +
                                  shape_str(kernel.shape()));
  }
  // The output image is the "input" side of the adjoint convolution.
  const Window g{filters, out_h, out_w, kh, kw, stride, padding, 1, in_h, in_w};

  const long in_plane = in_channels * in_h * in_w;
  const long out_plane = filters * out_h * out_w;
  std::vector<real> out(static_cast<std::size_t>(batch * out_plane), 0.0);
  std::vector<real> cols(static_cast<std::size_t>(g.rows() * g.cols()));
  ConstMatMap kmat(kernel.data().data(), in_channels, g.rows());
  for (long n = 0; n < batch; ++n) {
    MatMap(cols.data(), g.rows(), g.cols()).noalias() =
        kmat.transpose() * ConstMatMap(input.data().data() + n * in_plane, in_channels, g.cols());
    col2im(g, cols.data(), out.data() + n * out_plane);
  }

  Shape shape{input.dim(0), kernel.dim(1), static_cast<std::size_t>(out_h),
              static_cast<std::size_t>(out_w)};
  return make_result(std::move(shape), std::move(out), {input, kernel},
                     [g, batch, in_channels, in_plane, out_plane](Node& self) {
                       const auto& in = self.parents[0]->data;
                       const auto& kv = self.parents[1]->data;
                       auto gin = grad_sink(self.parents[0]);
                       auto gk = grad_sink(self.parents[1]);
                       std::vector<real> cols(static_cast<std::size_t>(g.rows() * g.cols()));
                       ConstMatMap kmat(kv.data(), in_channels, g.rows());
                       for (long n = 0; n < batch; ++n) {
                         im2col(g, self.grad.data() + n * out_plane, cols.data());
                         ConstMatMap gcols(cols.data(), g.rows(), g.cols());
                         if (!gin.empty()) {
                           MatMap(gin.data() + n * in_plane, in_channels, g.cols()).noalias() +=
                               kmat * gcols;
                         }
                         if (!gk.empty()) {
                           MatMap(gk.data(), in_channels, g.rows()).noalias() +=
                               ConstMatMap(in.data() + n * in_plane, in_channels, g.cols()) *
                               gcols.transpose();
                         }
                       }
                     });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require_4d(x, "add_channel_bias", "input");
  if (!bias.defined() || bias.ndim() != 1 || bias.dim(0) != x.dim(1)) {
    throw ShapeError(kModule, "add_channel_bias: bias does not match channels of " +
                                  shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<real> out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      real* p = out.data() + (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += b[c];
    }
  return make_result(x.shape(), std::move(out), {x, bias},
                     [batch, channels, plane](Node& self) {
                       auto gx = grad_sink(self.parents[0]);
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
                       auto gb = grad_sink(self.parents[1]);
                       if (gb.empty()) return;
                       for (std::size_t n = 0; n < batch; ++n)
                         for (std::size_t c = 0; c < channels; ++c) {
                           const real* p = self.grad.data() + (n * channels + c) * plane;
                           real acc = 0;
                           for (std::size_t i = 0; i < plane; ++i) acc += p[i];
                           gb[c] += acc;
                         }
                     });
}

Tensor max_pool2d(const Tensor& input, int window, int stride) {
  require_4d(input, "max_pool2d", "input");
  if (window < 1 || stride < 1) {
    throw DomainError(kModule, "max_pool2d: window and stride must be >= 1");
  }
  const long planes = static_cast<long>(input.dim(0) * input.dim(1));
  const long h = static_cast<long>(input.dim(2));
  const long w = static_cast<long>(input.dim(3));
  if (window > h || window > w) {
    throw DomainError(kModule, "max_pool2d: window " + std::to_string(window) +
                                   " exceeds input " + shape_str(input.shape()));
  }
  const long out_h = (h - window) / stride + 1;
  const long out_w = (w - window) / stride + 1;
  std::vector<real> out(static_cast<std::size_t>(planes * out_h * out_w));
  std::vector<std::size_t> argmax(out.size());
  const auto in = input.data();
  for (long p = 0; p < planes; ++p) {
    for (long oy = 0; oy < out_h; ++oy) {
      for (long ox = 0; ox < out_w; ++ox) {
        std::size_t best = static_cast<std::size_t>((p * h + oy * stride) * w + ox * stride);
        for (long dy = 0; dy < window; ++dy) {
          for (long dx = 0; dx < window; ++dx) {
            const auto idx =
                static_cast<std::size_t>((p * h + oy * stride + dy) * w + ox * stride + dx);
            if (in[idx] > in[best]) best = idx;  // strict: first occurrence wins ties
          }
        }
        const auto o = static_cast<std::size_t>((p * out_h + oy) * out_w + ox);
        out[o] = in[best];
        argmax[o] = best;
      }
    }
  }
  Shape shape{input.dim(0), input.dim(1), static_cast<std::size_t>(out_h),
              static_cast<std::size_t>(out_w)};
  return make_result(std::move(shape), std::move(out), {input},
                     [argmax = std::move(argmax)](Node& self) {
                       auto g = grad_sink(self.parents[0]);
                       if (g.empty()) return;
                       for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self.grad[o];
                     });
}

}  // namespace semcom
