#pragma once

#include <span>

#include "semcom/tensor.hpp"

namespace semcom {

/// L_Enc = (1/N) sum_i sum_m (D_i(m) - D0_i(m))^2 over a batch whose first
/// axis is the frame index.
Tensor encoder_loss(const Tensor& predicted, const Tensor& target);

/// L_Dec = (1/N) sum_i (n_hat_i - n0_i)^2.
Tensor decoder_loss(const Tensor& predicted_counts, const Tensor& target_counts);
real decoder_loss(std::span<const real> predicted_counts, std::span<const real> target_counts);

/// L_count = L_Enc + lambda L_Dec.
Tensor total_loss(const Tensor& enc, const Tensor& dec, real lambda);
real total_loss(real enc, real dec, real lambda);

}  // namespace semcom
