#pragma once

#include <cstdint>
#include <limits>

#include "semcom/ops.hpp"
#include "semcom/parameters.hpp"

namespace semcom {

/// Setting snr_db to this value disables the noise term.
inline constexpr real kNoiselessSnr = std::numeric_limits<real>::infinity();

struct ChannelConfig {
  real snr_db = 10.0;
  real gain_h = 1.0;
  std::uint64_t seed = 0;
  /// Symbols per frame; 0 selects map_size / 4.
  std::size_t symbols = 0;
};

/// sigma^2 = 10^(-snr_db / 10) for unit signal power; 0 when noiseless.
real noise_variance(const ChannelConfig& cfg);

std::size_t resolve_symbol_count(const ChannelConfig& cfg, std::size_t map_size);

/// Scales the whole batch so the mean squared symbol is 1. An all-zero batch
/// is passed through unchanged (zero symbols, zero gradient).
Tensor normalize_power(const Tensor& symbols);

/// i.i.d. N(0, sigma^2) samples shaped like `shape`; all zeros when noiseless.
Tensor draw_noise(const Shape& shape, const ChannelConfig& cfg, Rng& rng);

/// Y = H X + eta with a fresh noise draw. With noise disabled and H = 1 the
/// output is bit-identical to X.
Tensor transmit(const Tensor& symbols, const ChannelConfig& cfg, Rng& rng);

/// Y = H X + eta with caller-supplied (frozen) noise; eta is a constant in backward.
Tensor transmit_with_noise(const Tensor& symbols, real gain_h, const Tensor& noise);

/// Learned channel encoder/decoder pair around the AWGN channel. Each side is
/// affine + tanh followed by an affine output stage. The decoder output is
/// multiplied by `output_scale`, normally the encoder's density scale.
class ChannelCodec {
 public:
  static ChannelCodec build(std::size_t map_height, std::size_t map_width, std::size_t symbols,
                            Rng& rng, real output_scale = 1.0);

  /// Density maps [N, 1, H, W] (or [N, M]) -> power-normalised symbols [N, k].
  Tensor encode(const Tensor& maps) const;
  /// Received symbols [N, k] -> reconstructed maps [N, 1, H, W].
  Tensor decode(const Tensor& received) const;

  std::size_t symbols() const { return symbols_; }
  real output_scale() const { return output_scale_; }
  std::size_t map_size() const { return height_ * width_; }
  ParameterList parameters() const;

  /// Zeroes every decoder weight and bias (used by tests and diagnostics).
  void zero_decoder();

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t symbols_ = 0;
  real output_scale_ = 1.0;
  Tensor enc_w1_, enc_b1_, enc_w2_, enc_b2_;
  Tensor dec_w1_, dec_b1_, dec_w2_, dec_b2_;
};

}  // namespace semcom
