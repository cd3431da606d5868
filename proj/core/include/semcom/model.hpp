#pragma once

#include <cstdint>

#include "semcom/channel.hpp"
#include "semcom/decoder.hpp"
#include "semcom/encoder.hpp"

namespace semcom {

struct ModelConfig {
  EncoderConfig encoder;
  ChannelConfig channel;
  DecoderConfig decoder;
};

/// 8x8 pipeline small enough for exhaustive finite-difference checks.
ModelConfig micro_model_config();

/// Every intermediate of one end-to-end pass.
struct ForwardResult {
  Tensor density;        // D  [N, 1, H, W]
  Tensor symbols;        // X  [N, k]
  Tensor received;       // Y  [N, k]
  Tensor reconstructed;  // Z  [N, 1, H, W]
  Tensor counts;         // n_hat [N]
};

/// Semantic encoder -> channel encoder -> AWGN -> channel decoder -> LSTM decoder.
class SemComModel {
 public:
  static SemComModel build(const ModelConfig& config, std::uint64_t seed);

  /// Frames are grouped into consecutive sequences of `sequence_length`; LSTM
  /// state restarts at every group. When `frozen_noise` is given it replaces
  /// the channel noise draw.
  ForwardResult forward(const Tensor& images, bool training, Rng& rng,
                        const Tensor& frozen_noise = {}) const;

  ParameterList parameters() const;

  SemanticEncoder& encoder() { return encoder_; }
  const SemanticEncoder& encoder() const { return encoder_; }
  ChannelCodec& codec() { return codec_; }
  const ChannelCodec& codec() const { return codec_; }
  SemanticDecoder& decoder() { return decoder_; }
  const SemanticDecoder& decoder() const { return decoder_; }
  ChannelConfig& channel() { return channel_; }
  const ChannelConfig& channel() const { return channel_; }

  /// Current configuration, including the live p / dropout / SNR settings.
  ModelConfig config() const;

 private:
  SemanticEncoder encoder_;
  ChannelCodec codec_;
  SemanticDecoder decoder_;
  ChannelConfig channel_;
};

}  // namespace semcom
