#include "semcom/encoder.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

namespace {

const char* kModule = "semantic-encoder";

// Hidden ReLU layers start with a small positive bias so that narrow stages
// (a 2-channel sandwich, say) are not dead before the first step.
constexpr real kHiddenBias = 0.1;

ConvLayer make_conv(std::size_t out_ch, std::size_t in_ch, std::size_t kh, std::size_t kw,
                    Rng& rng) {
  const real fan_in = static_cast<real>(in_ch * kh * kw);
  const real bound = std::sqrt(6.0 / fan_in);
  return {uniform({out_ch, in_ch, kh, kw}, -bound, bound, rng, true),
          Tensor::full({out_ch}, kHiddenBias, true)};
}

// Softplus predictor: symmetric weights and a bias of -2, so every pixel
// starts at a small density (0.127 times the density scale) with a live
// gradient.
// Rectifier predictor: non-negative weights on non-negative features keep it
// live at init.
ConvLayer make_predictor(std::size_t in_ch, OutputActivation activation, Rng& rng) {
  const real bound = 1.0 / static_cast<real>(in_ch);
  if (activation == OutputActivation::softplus) {
    return {uniform({1, in_ch, 1, 1}, -bound, bound, rng, true), Tensor::full({1}, -2.0, true)};
  }
  return {uniform({1, in_ch, 1, 1}, 0.0, bound, rng, true), Tensor::zeros({1}, true)};
}

// Transposed kernels are [in, out, k, k]; each output pixel sees roughly
// in * (k / stride)^2 taps, which is the effective fan-in.
ConvLayer make_deconv(std::size_t in_ch, std::size_t out_ch, const DeconvStage& stage, Rng& rng) {
  const auto k = static_cast<std::size_t>(stage.kernel);
  const real taps = static_cast<real>(stage.kernel) / static_cast<real>(stage.stride);
  const real fan_in = static_cast<real>(in_ch) * taps * taps;
  const real bound = std::sqrt(6.0 / fan_in);
  return {uniform({in_ch, out_ch, k, k}, -bound, bound, rng, true),
          Tensor::full({out_ch}, kHiddenBias, true)};
}

DeconvStage stage_for_stride(int stride) {
  if (stride == 1) return {1, 3, 1};
  return {stride, 2 * stride, stride / 2};
}

Tensor conv_relu(const Tensor& x, const ConvLayer& layer, int dilation = 1, int padding = 0) {
  return relu(add_channel_bias(conv2d(x, layer.kernel, 1, dilation, padding), layer.bias));
}

}  // namespace

const char* activation_name(OutputActivation activation) {
  return activation == OutputActivation::softplus ? "softplus" : "relu";
}

EncoderConfig micro_encoder_config() {
  EncoderConfig c;
  c.input_height = 8;
  c.input_width = 8;
  c.input_channels = 1;
  c.block_channels = {4, 8};
  c.sandwich_channels = 2;
  c.atrous_rate = 2;
  c.reweight_channels = 4;
  c.deconv_channels = {4, 4};
  return c;
}

void validate(const EncoderConfig& config) {
  if (config.input_height == 0 || config.input_width == 0 || config.input_channels == 0) {
    throw ConfigError(kModule, "input dimensions must be positive");
  }
  if (!(config.density_scale > 0) || !std::isfinite(config.density_scale)) {
    throw ConfigError(kModule, "density_scale must be a positive finite real");
  }
  if (config.atrous_rate < 1) throw ConfigError(kModule, "atrous_rate must be >= 1");
  for (auto c : config.block_channels) {
    if (c == 0) throw ConfigError(kModule, "block channel counts must be positive");
  }
  if (config.sandwich_channels == 0 || config.reweight_channels == 0 ||
      config.deconv_channels[0] == 0 || config.deconv_channels[1] == 0) {
    throw ConfigError(kModule, "stage channel counts must be positive");
  }
  if (config.block_channels.size() > 16) throw ConfigError(kModule, "too many pooling blocks");
  const std::size_t factor = std::size_t{1} << config.block_channels.size();
  if (config.input_height % factor != 0 || config.input_width % factor != 0) {
    throw ConfigError(kModule, "input " + std::to_string(config.input_height) + "x" +
                                   std::to_string(config.input_width) +
                                   " is not divisible by the pooling factor " +
                                   std::to_string(factor) +
                                   "; the deconvolution stages cannot restore it exactly");
  }
}

std::array<DeconvStage, 2> deconv_plan(const EncoderConfig& config) {
  const int factor = 1 << config.block_channels.size();
  const int second = factor >= 2 ? 2 : 1;
  const int first = factor / second;
  return {stage_for_stride(first), stage_for_stride(second)};
}

DensityMap DensityMap::zeros(std::size_t height, std::size_t width) {
  return {height, width, std::vector<real>(height * width, 0.0)};
}

real count_from_map(std::span<const real> map) {
  real total = 0;
  for (real v : map) total += v;
  return total;
}

real count_from_map(const DensityMap& map) { return count_from_map(map.values); }

std::vector<real> counts_from_batch(const Tensor& maps) {
  const std::size_t n = maps.dim(0);
  const std::size_t per = maps.numel() / n;
  std::vector<real> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = count_from_map(maps.data().subspan(i * per, per));
  return out;
}

SemanticEncoder SemanticEncoder::build(const EncoderConfig& config, Rng& rng) {
  validate(config);
  SemanticEncoder enc;
  enc.config_ = config;
  enc.plan_ = deconv_plan(config);

  std::size_t channels = config.input_channels;
  for (auto out : config.block_channels) {
    enc.blocks_.push_back(make_conv(out, channels, 3, 3, rng));
    channels = out;
  }
  const std::size_t deep = channels;
  enc.sandwich_ = make_conv(config.sandwich_channels, deep, 1, 1, rng);
  enc.atrous_ = make_conv(deep, config.sandwich_channels, 3, 3, rng);
  enc.reweight_ = make_conv(config.reweight_channels, deep, 1, 1, rng);
  enc.deconvs_[0] =
      make_deconv(config.reweight_channels, config.deconv_channels[0], enc.plan_[0], rng);
  enc.deconvs_[1] =
      make_deconv(config.deconv_channels[0], config.deconv_channels[1], enc.plan_[1], rng);
  enc.predictor_ = make_predictor(config.deconv_channels[1], config.output_activation, rng);
  return enc;
}

Tensor SemanticEncoder::encode(const Tensor& images) const {
  if (images.ndim() != 4 || images.dim(1) != config_.input_channels ||
      images.dim(2) != config_.input_height || images.dim(3) != config_.input_width) {
    throw ShapeError(kModule, "expected images [N," + std::to_string(config_.input_channels) +
                                  "," + std::to_string(config_.input_height) + "," +
                                  std::to_string(config_.input_width) + "], got " +
                                  shape_str(images.shape()));
  }
  Tensor x = images;
  for (const auto& block : blocks_) {
    x = max_pool2d(conv_relu(x, block, 1, 1), 2, 2);
  }
  x = conv_relu(x, sandwich_);
  x = conv_relu(x, atrous_, config_.atrous_rate, config_.atrous_rate);
  x = conv_relu(x, reweight_);
  for (std::size_t i = 0; i < deconvs_.size(); ++i) {
    const auto& st = plan_[i];
    x = relu(add_channel_bias(transposed_conv2d(x, deconvs_[i].kernel, st.stride, st.padding),
                              deconvs_[i].bias));
  }
  const Tensor logits = add_channel_bias(conv2d(x, predictor_.kernel), predictor_.bias);
  const Tensor density =
      config_.output_activation == OutputActivation::softplus ? softplus(logits) : relu(logits);
  return config_.density_scale == 1.0 ? density : scale(density, config_.density_scale);
}

ParameterList SemanticEncoder::parameters() const {
  ParameterList out;
  auto push = [&out](const std::string& name, const ConvLayer& layer) {
    out.push_back({name + ".kernel", layer.kernel});
    out.push_back({name + ".bias", layer.bias});
  };
  for (std::size_t i = 0; i < blocks_.size(); ++i) push("encoder.block" + std::to_string(i), blocks_[i]);
  push("encoder.sandwich", sandwich_);
  push("encoder.atrous", atrous_);
  push("encoder.reweight", reweight_);
  push("encoder.deconv0", deconvs_[0]);
  push("encoder.deconv1", deconvs_[1]);
  push("encoder.predictor", predictor_);
  return out;
}

}  // namespace semcom
