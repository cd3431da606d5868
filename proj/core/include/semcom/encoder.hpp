#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "semcom/ops.hpp"
#include "semcom/parameters.hpp"

namespace semcom {

/// Non-negative activation on the predictor output. The rectifier gives exact
/// zeros but tends to die on sparse density targets; softplus never does.
enum class OutputActivation { softplus, relu };

const char* activation_name(OutputActivation activation);

/// Structure of the density-map CNN. Each entry of `block_channels` is a
/// 3x3 conv + ReLU + 2x2 max-pool stage; the two transposed convolutions undo
/// the total pooling factor so the map comes out at input resolution.
struct EncoderConfig {
  std::size_t input_height = 64;
  std::size_t input_width = 64;
  std::size_t input_channels = 1;
  std::vector<std::size_t> block_channels{32, 64};
  std::size_t sandwich_channels = 16;
  int atrous_rate = 2;
  std::size_t reweight_channels = 16;
  std::array<std::size_t, 2> deconv_channels{32, 16};
  OutputActivation output_activation = OutputActivation::softplus;
  /// Fixed factor on the predictor output, so per-pixel densities of order
  /// 1e-2 come from logits of order one.
  real density_scale = 0.01;
};

/// 8x8 configuration used by the gradient-check suites.
EncoderConfig micro_encoder_config();

/// Throws ConfigError when the config cannot produce an input-sized map.
void validate(const EncoderConfig& config);

struct DeconvStage {
  int stride;
  int kernel;
  int padding;
};

/// Stride/kernel/padding of the two upsampling stages. Their combined stride
/// equals the pooling factor 2^blocks; each stage multiplies size exactly.
std::array<DeconvStage, 2> deconv_plan(const EncoderConfig& config);

struct ConvLayer {
  Tensor kernel;
  Tensor bias;
};

/// Per-pixel vehicle density of one frame; the sum over pixels is the count.
struct DensityMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<real> values;

  static DensityMap zeros(std::size_t height, std::size_t width);
  real& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  real at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

real count_from_map(std::span<const real> map);
real count_from_map(const DensityMap& map);
/// Per-frame counts of a [N, 1, H, W] (or [N, M]) density batch.
std::vector<real> counts_from_batch(const Tensor& maps);

class SemanticEncoder {
 public:
  /// Builds the parameter set with fan-in scaled uniform initialisation.
  static SemanticEncoder build(const EncoderConfig& config, Rng& rng);

  /// images [N, C, H, W] -> non-negative density maps [N, 1, H, W].
  Tensor encode(const Tensor& images) const;

  ParameterList parameters() const;
  const EncoderConfig& config() const { return config_; }
  ConvLayer& predictor() { return predictor_; }

 private:
  EncoderConfig config_;
  std::vector<ConvLayer> blocks_;
  ConvLayer sandwich_;
  ConvLayer atrous_;
  ConvLayer reweight_;
  std::array<ConvLayer, 2> deconvs_;
  std::array<DeconvStage, 2> plan_{};
  ConvLayer predictor_;
};

}  // namespace semcom
