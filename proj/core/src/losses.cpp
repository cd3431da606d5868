#include "semcom/losses.hpp"

#include "semcom/error.hpp"
#include "semcom/ops.hpp"

namespace semcom {

namespace {
const char* kModule = "training";
}

Tensor encoder_loss(const Tensor& predicted, const Tensor& target) {
  if (!predicted.defined() || !target.defined() || predicted.shape() != target.shape() ||
      predicted.ndim() == 0 || predicted.dim(0) == 0) {
    throw ShapeError(kModule, "encoder_loss: predicted " +
                                  (predicted.defined() ? shape_str(predicted.shape()) : "none") +
                                  " vs target " +
                                  (target.defined() ? shape_str(target.shape()) : "none"));
  }
  const real frames = static_cast<real>(predicted.dim(0));
  return scale(sum(square(sub(predicted, target))), 1.0 / frames);
}

Tensor decoder_loss(const Tensor& predicted_counts, const Tensor& target_counts) {
  if (!predicted_counts.defined() || !target_counts.defined() ||
      predicted_counts.shape() != target_counts.shape() || predicted_counts.numel() == 0) {
    throw ShapeError(kModule, "decoder_loss: count vectors differ in length");
  }
  return scale(sum(square(sub(predicted_counts, target_counts))),
               1.0 / static_cast<real>(predicted_counts.numel()));
}

real decoder_loss(std::span<const real> predicted_counts, std::span<const real> target_counts) {
  if (predicted_counts.size() != target_counts.size() || predicted_counts.empty()) {
    throw ShapeError(kModule, "decoder_loss: count vectors differ in length");
  }
  real acc = 0;
  for (std::size_t i = 0; i < predicted_counts.size(); ++i) {
    const real e = predicted_counts[i] - target_counts[i];
    acc += e * e;
  }
  return acc / static_cast<real>(predicted_counts.size());
}

Tensor total_loss(const Tensor& enc, const Tensor& dec, real lambda) {
  if (lambda < 0) throw DomainError(kModule, "lambda must be non-negative");
  return add(enc, scale(dec, lambda));
}

real total_loss(real enc, real dec, real lambda) {
  if (lambda < 0) throw DomainError(kModule, "lambda must be non-negative");
  return enc + lambda * dec;
}

}  // namespace semcom
