#include <doctest.h>

#include <cmath>

#include "semcom/adam.hpp"
#include "semcom/error.hpp"
#include "support.hpp"

using namespace semcom;
using semcom::test::check_gradients;
using semcom::test::random_tensor;
using semcom::test::to_vector;

namespace {

// Direct 7-loop convolution used as an independent oracle.
std::vector<real> naive_conv(const Tensor& x, const Tensor& k, int stride, int dilation, int pad) {
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto f = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const long oh = (static_cast<long>(h) + 2 * pad - dilation * (static_cast<long>(kh) - 1) - 1) / stride + 1;
  const long ow = (static_cast<long>(w) + 2 * pad - dilation * (static_cast<long>(kw) - 1) - 1) / stride + 1;
  std::vector<real> out(n * f * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < f; ++o)
      for (long y = 0; y < oh; ++y)
        for (long xx = 0; xx < ow; ++xx) {
          real acc = 0;
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = y * stride - pad + static_cast<long>(i) * dilation;
                const long ix = xx * stride - pad + static_cast<long>(j) * dilation;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                acc += x.at(((b * c + ch) * h + iy) * w + ix) * k.at(((o * c + ch) * kh + i) * kw + j);
              }
          out[((b * f + o) * oh + y) * ow + xx] = acc;
        }
  return out;
}

// Scatter form of the transposed convolution; kernel [Cin, Cout, kh, kw].
std::vector<real> naive_deconv(const Tensor& x, const Tensor& k, int stride, int pad) {
  const auto n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto cout = k.dim(1), kh = k.dim(2), kw = k.dim(3);
  const long oh = (static_cast<long>(h) - 1) * stride - 2 * pad + static_cast<long>(kh);
  const long ow = (static_cast<long>(w) - 1) * stride - 2 * pad + static_cast<long>(kw);
  std::vector<real> out(n * cout * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx)
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long oy = static_cast<long>(y) * stride - pad + static_cast<long>(i);
                const long ox = static_cast<long>(xx) * stride - pad + static_cast<long>(j);
                if (oy < 0 || ox < 0 || oy >= oh || ox >= ow) continue;
                out[((b * cout + co) * oh + oy) * ow + ox] +=
                    x.at(((b * cin + ci) * h + y) * w + xx) * k.at(((ci * cout + co) * kh + i) * kw + j);
              }
  return out;
}

void require_close(const std::vector<real>& a, const std::vector<real>& b, real tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol));
}

void require_grad_ok(const test::GradCheck& g) {
  INFO(g.worst_entry);
  CHECK(g.checked > 0);
  CHECK(g.failures == 0);
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("shape and data invariants") {
    Tensor t = Tensor::zeros({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.data().size() == 24);
    CHECK(t.ndim() == 3);
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), ShapeError);
    CHECK(Tensor::scalar(3.5).item() == 3.5);
    CHECK_THROWS_AS(Tensor::zeros({2}).item(), ShapeError);
  }

  TEST_CASE("grad has the data shape and zero_grad clears it") {
    Rng rng(1);
    Tensor x = random_tensor({3, 2}, rng);
    backward(sum(square(x)));
    REQUIRE(x.has_grad());
    CHECK(x.grad().size() == x.numel());
    x.zero_grad();
    for (real g : x.grad()) CHECK(g == 0.0);
  }

  TEST_CASE("backward of sum is all ones") {
    Tensor x = Tensor::from_data({2, 2}, {1, -2, 3, 4}, true);
    backward(sum(x));
    for (real g : x.grad()) CHECK(g == 1.0);
  }

  TEST_CASE("backward of sum(x*x) is 2x") {
    Tensor x = Tensor::from_data({2, 2}, {1, -2, 0.5, 4}, true);
    backward(sum(mul(x, x)));
    for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == 2 * x.at(i));
  }

  TEST_CASE("repeated backward accumulates on leaves") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
    backward(sum(scale(x, 2.0)));
    backward(sum(scale(x, 2.0)));
    for (real g : x.grad()) CHECK(g == 4.0);
  }

  TEST_CASE("backward rejects non-scalar losses") {
    Tensor x = Tensor::zeros({2}, true);
    CHECK_THROWS_AS(backward(scale(x, 1.0)), ShapeError);
  }

  TEST_CASE("no-grad mode records nothing") {
    Tensor x = Tensor::zeros({2}, true);
    Tensor y;
    {
      NoGradGuard guard;
      y = add(x, x);
    }
    CHECK_FALSE(y.requires_grad());
    CHECK(grad_enabled());
  }

  TEST_CASE("graph evaluation is deterministic") {
    auto run = [] {
      Rng rng(42);
      Tensor x = random_tensor({2, 3, 6, 6}, rng);
      Tensor k = random_tensor({4, 3, 3, 3}, rng);
      Tensor y = sum(square(relu(conv2d(x, k, 1, 2, 2))));
      backward(y);
      std::vector<real> out{y.item()};
      for (real g : k.grad()) out.push_back(g);
      for (real g : x.grad()) out.push_back(g);
      return out;
    };
    CHECK(run() == run());
  }

  TEST_CASE("pointwise values") {
    const Tensor z = Tensor::zeros({3});
    for (real v : to_vector(sigmoid(z))) CHECK(v == 0.5);
    for (real v : to_vector(semcom::tanh(z))) CHECK(v == 0.0);
    Rng rng(3);
    const Tensor x = random_tensor({2, 5}, rng);
    CHECK(to_vector(mul(x, Tensor::full({2, 5}, 1.0))) == to_vector(x));
    CHECK(to_vector(relu(Tensor::from_data({3}, {-1, 0, 2}))) == std::vector<real>{0, 0, 2});
    CHECK(to_vector(pointwise(PointwiseKind::scale, x, {}, 3.0)) == to_vector(scale(x, 3.0)));
  }

  TEST_CASE("binary pointwise ops refuse mismatched shapes") {
    const Tensor a = Tensor::zeros({2, 3});
    const Tensor b = Tensor::zeros({3, 2});
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(sub(a, b), ShapeError);
    CHECK_THROWS_AS(mul(a, b), ShapeError);
    CHECK_THROWS_AS(matmul(a, Tensor::zeros({2, 2})), ShapeError);
    CHECK_THROWS_AS(fully_connected(a, Tensor::zeros({4, 2}), Tensor::zeros({2})), ShapeError);
    CHECK_THROWS_AS(fully_connected(a, Tensor::zeros({3, 2}), Tensor::zeros({3})), ShapeError);
  }

  TEST_CASE("pointwise gradients match finite differences") {
    Rng rng(5);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    // Keep relu inputs away from the kink.
    Tensor r = Tensor::from_data({6}, {-0.9, -0.4, -0.1, 0.2, 0.5, 1.3}, true);
    const ParameterList ab = {{"a", a}, {"b", b}};
    const Tensor w = random_tensor({3, 4}, rng, -1, 1, false);
    auto weighted = [&](const Tensor& t) { return sum(mul(t, w)); };
    require_grad_ok(check_gradients([&] { return weighted(sigmoid(a)); }, ab));
    require_grad_ok(check_gradients([&] { return weighted(semcom::tanh(a)); }, ab));
    require_grad_ok(check_gradients([&] { return sum(square(relu(r))); }, {{"r", r}}));
    require_grad_ok(check_gradients([&] { return weighted(add(a, b)); }, ab));
    require_grad_ok(check_gradients([&] { return weighted(sub(a, b)); }, ab));
    require_grad_ok(check_gradients([&] { return weighted(mul(a, b)); }, ab));
    require_grad_ok(check_gradients([&] { return weighted(scale(a, -2.5)); }, ab));
    require_grad_ok(check_gradients([&] { return weighted(square(a)); }, ab));
  }

  TEST_CASE("reduction and reshaping gradients") {
    Rng rng(6);
    Tensor a = random_tensor({4, 3}, rng);
    Tensor b = random_tensor({2, 3}, rng);
    const ParameterList ab = {{"a", a}, {"b", b}};
    require_grad_ok(check_gradients([&] { return square(mean(a)); }, ab));
    require_grad_ok(check_gradients([&] { return sum(square(row_sum(a))); }, ab));
    require_grad_ok(check_gradients([&] { return sum(square(reshape(a, {2, 6}))); }, ab));
    require_grad_ok(check_gradients([&] { return sum(mul(row(a, 2), row(b, 1))); }, ab));
    require_grad_ok(check_gradients([&] { return sum(square(slice_first(a, 1, 3))); }, ab));
    require_grad_ok(check_gradients([&] { return sum(sigmoid(concat_rows({a, b}))); }, ab));
    CHECK(concat_rows({a, b}).shape() == Shape{6, 3});
    CHECK(row_sum(a).shape() == Shape{4});
    CHECK_THROWS_AS(reshape(a, {5, 2}), ShapeError);
    CHECK_THROWS_AS(slice_first(a, 2, 5), ShapeError);
  }

  TEST_CASE("fully connected examples") {
    Rng rng(7);
    const Tensor x = random_tensor({3, 4}, rng, -1, 1, false);
    std::vector<real> eye(16, 0.0);
    for (int i = 0; i < 4; ++i) eye[i * 5] = 1.0;
    CHECK(to_vector(fully_connected(x, Tensor::from_data({4, 4}, eye), Tensor::zeros({4}))) ==
          to_vector(x));
    const Tensor b = Tensor::from_data({2}, {0.5, -1.5});
    const Tensor y = fully_connected(x, Tensor::zeros({4, 2}), b);
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(y.at(r * 2) == 0.5);
      CHECK(y.at(r * 2 + 1) == -1.5);
    }
  }

  TEST_CASE("dense gradients") {
    Rng rng(8);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor w = random_tensor({4, 5}, rng);
    Tensor b = random_tensor({5}, rng);
    Tensor d = random_tensor({4}, rng);
    const ParameterList all = {{"x", x}, {"w", w}, {"b", b}, {"d", d}};
    require_grad_ok(check_gradients([&] { return sum(semcom::tanh(fully_connected(x, w, b))); }, all));
    require_grad_ok(check_gradients([&] { return sum(square(matmul(x, w))); }, all));
    require_grad_ok(check_gradients([&] { return sum(sigmoid(scale_columns(x, d))); }, all));
    require_grad_ok(check_gradients(
        [&] { return sum(square(add_row_bias(matmul(x, w), b))); }, all));
  }

  TEST_CASE("conv2d examples") {
    const Tensor ones = Tensor::full({1, 1, 3, 3}, 1.0);
    const Tensor y = conv2d(ones, Tensor::full({1, 1, 1, 1}, 2.0));
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    for (real v : y.data()) CHECK(v == 2.0);

    const Tensor d = conv2d(Tensor::full({1, 1, 5, 5}, 1.0), Tensor::full({1, 1, 3, 3}, 1.0), 1, 2, 0);
    CHECK(d.shape() == Shape{1, 1, 1, 1});
    CHECK(d.item() == 9.0);
  }

  TEST_CASE("conv2d matches the direct loop oracle") {
    Rng rng(9);
    struct Case { int stride, dilation, pad; };
    for (const Case c : {Case{1, 1, 0}, Case{1, 1, 1}, Case{2, 1, 1}, Case{1, 2, 2}, Case{2, 3, 1}}) {
      const Tensor x = random_tensor({2, 3, 9, 8}, rng, -1, 1, false);
      const Tensor k = random_tensor({4, 3, 3, 3}, rng, -1, 1, false);
      const Tensor y = conv2d(x, k, c.stride, c.dilation, c.pad);
      const long oh = (9 + 2 * c.pad - c.dilation * 2 - 1) / c.stride + 1;
      const long ow = (8 + 2 * c.pad - c.dilation * 2 - 1) / c.stride + 1;
      CHECK(y.shape() == Shape{2, 4, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
      require_close(to_vector(y), naive_conv(x, k, c.stride, c.dilation, c.pad), 1e-12);
    }
  }

  TEST_CASE("conv2d with dilation 1 is the standard convolution") {
    Rng rng(10);
    const Tensor x = random_tensor({1, 2, 6, 6}, rng, -1, 1, false);
    const Tensor k = random_tensor({3, 2, 3, 3}, rng, -1, 1, false);
    CHECK(to_vector(conv2d(x, k, 1, 1, 1)) == to_vector(conv2d(x, k, 1, 1, 1)));
    CHECK(to_vector(conv2d(x, k)) == to_vector(conv2d(x, k, 1, 1, 0)));
  }

  TEST_CASE("conv2d errors") {
    const Tensor x = Tensor::zeros({1, 2, 5, 5});
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 3, 3, 3})), ShapeError);
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 2, 3, 3}), 0), DomainError);
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 2, 3, 3}), 1, 0), DomainError);
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 2, 3, 3}), 1, 3, 0), ShapeError);
    CHECK_THROWS_AS(conv2d(Tensor::zeros({2, 5, 5}), Tensor::zeros({1, 2, 3, 3})), ShapeError);
  }

  TEST_CASE("conv2d gradients on 2x3x8x8 input and 4x3x3x3 kernel") {
    Rng rng(11);
    Tensor x = random_tensor({2, 3, 8, 8}, rng);
    Tensor k = random_tensor({4, 3, 3, 3}, rng);
    Tensor b = random_tensor({4}, rng);
    const Tensor w = random_tensor({2, 4, 8, 8}, rng, -1, 1, false);
    const ParameterList p = {{"input", x}, {"kernel", k}, {"bias", b}};
    require_grad_ok(check_gradients(
        [&] { return sum(mul(add_channel_bias(conv2d(x, k, 1, 1, 1), b), w)); }, p));
    const Tensor w2 = random_tensor({2, 4, 4, 4}, rng, -1, 1, false);
    require_grad_ok(check_gradients([&] { return sum(mul(conv2d(x, k, 2, 2, 2), w2)); }, p));
  }

  TEST_CASE("transposed_conv2d size formula") {
    const Tensor y = transposed_conv2d(Tensor::full({1, 1, 2, 2}, 1.0), Tensor::full({1, 1, 2, 2}, 1.0), 2, 0);
    CHECK(y.shape() == Shape{1, 1, 4, 4});
    for (real v : y.data()) CHECK(v == 1.0);
    const Tensor z = transposed_conv2d(Tensor::zeros({2, 3, 5, 4}), Tensor::zeros({3, 2, 4, 4}), 2, 1);
    CHECK(z.shape() == Shape{2, 2, 10, 8});
    CHECK_THROWS_AS(transposed_conv2d(Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({3, 1, 2, 2}), 2, 0),
                    ShapeError);
    CHECK_THROWS_AS(transposed_conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 2}), 0, 0),
                    DomainError);
  }

  TEST_CASE("transposed_conv2d matches the scatter oracle") {
    Rng rng(12);
    struct Case { int stride, pad, k; };
    for (const Case c : {Case{1, 0, 3}, Case{2, 0, 2}, Case{2, 1, 4}, Case{3, 1, 3}}) {
      const Tensor x = random_tensor({2, 3, 4, 5}, rng, -1, 1, false);
      const auto ks = static_cast<std::size_t>(c.k);
      const Tensor k = random_tensor({3, 2, ks, ks}, rng, -1, 1, false);
      require_close(to_vector(transposed_conv2d(x, k, c.stride, c.pad)),
                    naive_deconv(x, k, c.stride, c.pad), 1e-12);
    }
  }

  TEST_CASE("transposed_conv2d is the input gradient of conv2d") {
    Rng rng(13);
    for (int stride : {1, 2}) {
      Tensor x = random_tensor({2, 3, 8, 8}, rng);
      const Tensor k = random_tensor({4, 3, 4, 4}, rng, -1, 1, false);
      const Tensor conv = conv2d(x, k, stride, 1, 1);
      const Tensor g = random_tensor(conv.shape(), rng, -1, 1, false);
      x.zero_grad();
      backward(sum(mul(conv, g)));
      require_close(to_vector(transposed_conv2d(g, k, stride, 1)),
                    std::vector<real>(x.grad().begin(), x.grad().end()), 1e-12);
    }
  }

  TEST_CASE("transposed_conv2d gradients") {
    Rng rng(14);
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor k = random_tensor({3, 2, 4, 4}, rng);
    const Tensor w = random_tensor({2, 2, 8, 8}, rng, -1, 1, false);
    require_grad_ok(check_gradients([&] { return sum(mul(transposed_conv2d(x, k, 2, 1), w)); },
                                    {{"input", x}, {"kernel", k}}));
  }

  TEST_CASE("max_pool2d examples") {
    const Tensor y = max_pool2d(Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2);
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.item() == 4.0);

    Tensor c = Tensor::full({1, 1, 4, 4}, 0.7, true);
    const Tensor pooled = max_pool2d(c, 2, 2);
    for (real v : pooled.data()) CHECK(v == 0.7);
    backward(sum(pooled));
    const std::vector<real> expected = {1, 0, 1, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0};
    CHECK(std::vector<real>(c.grad().begin(), c.grad().end()) == expected);

    CHECK_THROWS_AS(max_pool2d(Tensor::zeros({1, 1, 2, 2}), 3, 1), DomainError);
    CHECK_THROWS_AS(max_pool2d(Tensor::zeros({1, 1, 2, 2}), 0, 1), DomainError);
  }

  TEST_CASE("max_pool2d gradients on 1x2x6x6") {
    Rng rng(15);
    Tensor x = random_tensor({1, 2, 6, 6}, rng);  // continuous draws: no ties
    const Tensor w = random_tensor({1, 2, 3, 3}, rng, -1, 1, false);
    require_grad_ok(check_gradients([&] { return sum(mul(max_pool2d(x, 2, 2), w)); }, {{"x", x}}));
  }

  TEST_CASE("dropout") {
    Rng rng(16);
    const Tensor x = random_tensor({50, 20}, rng, -1, 1, false);
    CHECK(to_vector(dropout(x, 0.0, true, rng)) == to_vector(x));
    CHECK(to_vector(dropout(x, 0.0, false, rng)) == to_vector(x));
    CHECK(to_vector(dropout(x, 0.1, false, rng)) == to_vector(x));
    CHECK_THROWS_AS(dropout(x, 1.0, true, rng), DomainError);
    CHECK_THROWS_AS(dropout(x, -0.1, true, rng), DomainError);

    const Tensor ones = Tensor::full({100000}, 1.0);
    const Tensor d = dropout(ones, 0.1, true, rng);
    std::size_t zeros = 0;
    for (real v : d.data()) {
      if (v == 0.0) ++zeros;
      else CHECK(v == doctest::Approx(1.0 / 0.9).epsilon(1e-15));
    }
    const real fraction = static_cast<real>(zeros) / 1e5;
    CHECK(std::abs(fraction - 0.1) <= 0.01);
  }

  TEST_CASE("dropout gradient follows the mask") {
    Rng rng(17);
    Tensor x = random_tensor({4, 6}, rng);
    Rng mask_rng(99);
    const Tensor y = dropout(x, 0.5, true, mask_rng);
    backward(sum(y));
    for (std::size_t i = 0; i < x.numel(); ++i) {
      CHECK(x.grad()[i] == (y.at(i) == 0.0 ? 0.0 : 2.0));
    }
  }

  TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Rng rng(18);
    std::vector<Tensor> params = {random_tensor({3, 2}, rng)};
    const auto before = to_vector(params[0]);
    AdamState state = make_adam_state(params);
    adam_step(params, {Tensor::zeros({3, 2})}, state, 0.01);
    CHECK(to_vector(params[0]) == before);
    CHECK(state.step_count == 1);
  }

  TEST_CASE("adam: first step moves each entry by lr * g / (|g| + eps)") {
    std::vector<Tensor> params = {Tensor::from_data({3}, {0.5, -1.0, 2.0}, true)};
    const std::vector<real> g = {0.3, -4.0, 1e-3};
    AdamState state = make_adam_state(params);
    const real lr = 0.01;
    adam_step(params, {Tensor::from_data({3}, g)}, state, lr);
    const std::vector<real> start = {0.5, -1.0, 2.0};
    for (std::size_t i = 0; i < 3; ++i) {
      const real expected = start[i] - lr * g[i] / (std::abs(g[i]) + 1e-8);
      CHECK(params[0].at(i) == doctest::Approx(expected).epsilon(1e-14));
      CHECK(std::abs(std::abs(params[0].at(i) - start[i]) - lr) < 1e-7);
    }
  }

  TEST_CASE("adam: 200 steps on (w - 3)^2 from 0 at lr 0.1") {
    std::vector<Tensor> params = {Tensor::scalar(0.0, true)};
    AdamState state;
    for (int i = 0; i < 200; ++i) {
      params[0].zero_grad();
      backward(square(sub(params[0], Tensor::scalar(3.0))));
      adam_step(params, state, 0.1);
    }
    CHECK(std::abs(params[0].item() - 3.0) < 0.05);
    CHECK(state.step_count == 200);
  }

  TEST_CASE("adam: state is shape checked") {
    std::vector<Tensor> params = {Tensor::zeros({2}, true)};
    AdamState state = make_adam_state(params);
    CHECK_THROWS_AS(adam_step(params, {Tensor::zeros({3})}, state, 0.1), ShapeError);
    CHECK_THROWS_AS(adam_step(params, {}, state, 0.1), ShapeError);
    for (std::size_t i = 0; i < params.size(); ++i) {
      CHECK(state.first_moment[i].shape() == params[i].shape());
      CHECK(state.second_moment[i].shape() == params[i].shape());
    }
  }
}
