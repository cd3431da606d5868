#include "semcom/channel.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

namespace {

const char* kModule = "channel";

Tensor fan_in_uniform(std::size_t in, std::size_t out, Rng& rng) {
  const real bound = 1.0 / std::sqrt(static_cast<real>(in));
  return uniform({in, out}, -bound, bound, rng, true);
}

}  // namespace

real noise_variance(const ChannelConfig& cfg) {
  if (std::isinf(cfg.snr_db) && cfg.snr_db > 0) return 0.0;
  return std::pow(10.0, -cfg.snr_db / 10.0);
}

std::size_t resolve_symbol_count(const ChannelConfig& cfg, std::size_t map_size) {
  const std::size_t k = cfg.symbols == 0 ? map_size / 4 : cfg.symbols;
  if (k == 0) throw ConfigError(kModule, "symbols per frame must be positive");
  return k;
}

Tensor normalize_power(const Tensor& symbols) {
  const auto x = symbols.data();
  const std::size_t n = x.size();
  if (n == 0) throw ShapeError(kModule, "normalize_power on empty batch");
  real energy = 0;
  for (real v : x) energy += v * v;
  const real power = energy / static_cast<real>(n);
  if (power == 0.0) {
    return detail::make_result(symbols.shape(), std::vector<real>(n, 0.0), {symbols},
                               [](detail::Node&) {});
  }
  const real inv_root = 1.0 / std::sqrt(power);
  std::vector<real> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * inv_root;
  return detail::make_result(
      symbols.shape(), std::move(out), {symbols}, [n, power, inv_root](detail::Node& self) {
        auto g = detail::grad_sink(self.parents[0]);
        if (g.empty()) return;
        const auto& xv = self.parents[0]->data;
        // d(x_i / sqrt(P)) / dx_j = delta_ij / sqrt(P) - x_i x_j / (n P^{3/2})
        real dot = 0;
        for (std::size_t i = 0; i < n; ++i) dot += self.grad[i] * xv[i];
        const real coupling = dot * inv_root / (static_cast<real>(n) * power);
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * inv_root - xv[i] * coupling;
      });
}

Tensor draw_noise(const Shape& shape, const ChannelConfig& cfg, Rng& rng) {
  const real variance = noise_variance(cfg);
  if (variance == 0.0) return Tensor::zeros(shape);
  return normal(shape, 0.0, std::sqrt(variance), rng);
}

Tensor transmit_with_noise(const Tensor& symbols, real gain_h, const Tensor& noise) {
  if (noise.shape() != symbols.shape()) {
    throw ShapeError(kModule, "noise " + shape_str(noise.shape()) + " vs symbols " +
                                  shape_str(symbols.shape()));
  }
  return add(scale(symbols, gain_h), noise);
}

Tensor transmit(const Tensor& symbols, const ChannelConfig& cfg, Rng& rng) {
  if (noise_variance(cfg) == 0.0) {
    return cfg.gain_h == 1.0 ? symbols : scale(symbols, cfg.gain_h);
  }
  return transmit_with_noise(symbols, cfg.gain_h, draw_noise(symbols.shape(), cfg, rng));
}

ChannelCodec ChannelCodec::build(std::size_t map_height, std::size_t map_width,
                                 std::size_t symbols, Rng& rng, real output_scale) {
  if (symbols == 0) throw ConfigError(kModule, "symbols per frame must be positive");
  if (!(output_scale > 0) || !std::isfinite(output_scale)) {
    throw ConfigError(kModule, "output scale must be a positive finite real");
  }
  ChannelCodec codec;
  codec.height_ = map_height;
  codec.width_ = map_width;
  codec.symbols_ = symbols;
  codec.output_scale_ = output_scale;
  const std::size_t m = map_height * map_width;
  codec.enc_w1_ = fan_in_uniform(m, symbols, rng);
  codec.enc_b1_ = Tensor::zeros({symbols}, true);
  codec.enc_w2_ = fan_in_uniform(symbols, symbols, rng);
  codec.enc_b2_ = Tensor::zeros({symbols}, true);
  codec.dec_w1_ = fan_in_uniform(symbols, symbols, rng);
  codec.dec_b1_ = Tensor::zeros({symbols}, true);
  codec.dec_w2_ = fan_in_uniform(symbols, m, rng);
  codec.dec_b2_ = Tensor::zeros({m}, true);
  return codec;
}

Tensor ChannelCodec::encode(const Tensor& maps) const {
  if (maps.ndim() < 2 || maps.numel() != maps.dim(0) * map_size()) {
    throw ShapeError(kModule, "channel_encode: maps " + shape_str(maps.shape()) +
                                  " do not hold " + std::to_string(map_size()) +
                                  " values per frame");
  }
  const Tensor flat = reshape(maps, {maps.dim(0), map_size()});
  const Tensor hidden = tanh(fully_connected(flat, enc_w1_, enc_b1_));
  return normalize_power(fully_connected(hidden, enc_w2_, enc_b2_));
}

Tensor ChannelCodec::decode(const Tensor& received) const {
  if (received.ndim() != 2 || received.dim(1) != symbols_) {
    throw ShapeError(kModule, "channel_decode: expected [N," + std::to_string(symbols_) +
                                  "] symbols, got " + shape_str(received.shape()));
  }
  const Tensor hidden = tanh(fully_connected(received, dec_w1_, dec_b1_));
  Tensor flat = fully_connected(hidden, dec_w2_, dec_b2_);
  if (output_scale_ != 1.0) flat = scale(flat, output_scale_);
  return reshape(flat, {received.dim(0), 1, height_, width_});
}

ParameterList ChannelCodec::parameters() const {
  return {{"channel.enc.w1", enc_w1_}, {"channel.enc.b1", enc_b1_},
          {"channel.enc.w2", enc_w2_}, {"channel.enc.b2", enc_b2_},
          {"channel.dec.w1", dec_w1_}, {"channel.dec.b1", dec_b1_},
          {"channel.dec.w2", dec_w2_}, {"channel.dec.b2", dec_b2_}};
}

void ChannelCodec::zero_decoder() {
  for (Tensor t : {dec_w1_, dec_b1_, dec_w2_, dec_b2_}) {
    for (auto& v : t.mutable_data()) v = 0.0;
  }
}

}  // namespace semcom
