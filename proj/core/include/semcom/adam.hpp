#pragma once

#include <cstdint>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

/// Per-parameter moment estimates of the Adam optimizer.
struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step_count = 0;
  real beta1 = 0.9;
  real beta2 = 0.999;
  real epsilon = 1e-8;
};

/// Zero moments shaped like `params`.
AdamState make_adam_state(const std::vector<Tensor>& params, real beta1 = 0.9,
                          real beta2 = 0.999, real epsilon = 1e-8);

/// One bias-corrected Adam update of `params` in place using `grads`
/// (one tensor per parameter, same shapes). Moments are allocated on first use
/// when `state` is empty.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               real lr);

/// Same, reading each parameter's accumulated gradient (absent grad = zero).
void adam_step(std::vector<Tensor>& params, AdamState& state, real lr);

}  // namespace semcom
