#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "semcom/ops.hpp"
#include "semcom/parameters.hpp"

namespace semcom::test {

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  real worst_error = 0;  // |analytic - numeric| / (rtol * scale + atol), <= 1 passes
  std::string worst_entry;
};

/// Central-difference check of d loss / d params. An entry passes when
/// |analytic - numeric| <= rtol * max(|analytic|, |numeric|) + atol.
inline GradCheck check_gradients(const std::function<Tensor()>& loss_fn,
                                 const ParameterList& params, real step = 1e-6,
                                 real rtol = 1e-4, real atol = 1e-8) {
  for (const auto& p : params) {
    Tensor t = p.value;
    t.zero_grad();
  }
  backward(loss_fn());
  std::vector<std::vector<real>> analytic;
  for (const auto& p : params) {
    const auto g = p.value.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  GradCheck out;
  NoGradGuard guard;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor t = params[k].value;
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const real saved = data[i];
      data[i] = saved + step;
      const real up = loss_fn().item();
      data[i] = saved - step;
      const real down = loss_fn().item();
      data[i] = saved;
      const real numeric = (up - down) / (2 * step);
      const real a = analytic[k][i];
      const real bound = rtol * std::max(std::abs(a), std::abs(numeric)) + atol;
      const real err = std::abs(a - numeric) / bound;
      ++out.checked;
      if (err > 1) ++out.failures;
      if (err > out.worst_error) {
        out.worst_error = err;
        out.worst_entry = params[k].name + "[" + std::to_string(i) + "] analytic " +
                          std::to_string(a) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return out;
}

inline Tensor random_tensor(Shape shape, Rng& rng, real low = -1, real high = 1,
                            bool requires_grad = true) {
  return uniform(std::move(shape), low, high, rng, requires_grad);
}

inline std::vector<real> to_vector(const Tensor& t) {
  const auto d = t.data();
  return {d.begin(), d.end()};
}

}  // namespace semcom::test
