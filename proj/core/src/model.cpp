#include "semcom/model.hpp"

#include "semcom/error.hpp"

namespace semcom {

ModelConfig micro_model_config() {
  ModelConfig c;
  c.encoder = micro_encoder_config();
  c.channel.snr_db = 10.0;
  c.channel.symbols = 16;
  c.decoder.layers = 3;
  c.decoder.hidden = 5;
  c.decoder.input_size = 6;
  c.decoder.sequence_length = 2;
  c.decoder.p = 0.8;
  c.decoder.dropout = 0.1;
  return c;
}

SemComModel SemComModel::build(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  SemComModel model;
  model.channel_ = config.channel;
  model.encoder_ = SemanticEncoder::build(config.encoder, rng);
  const std::size_t h = config.encoder.input_height;
  const std::size_t w = config.encoder.input_width;
  model.codec_ = ChannelCodec::build(h, w, resolve_symbol_count(config.channel, h * w), rng,
                                     config.encoder.density_scale);
  model.decoder_ = SemanticDecoder::build(config.decoder, h * w, rng);
  return model;
}

ForwardResult SemComModel::forward(const Tensor& images, bool training, Rng& rng,
                                   const Tensor& frozen_noise) const {
  ForwardResult r;
  r.density = encoder_.encode(images);
  r.symbols = codec_.encode(r.density);
  r.received = frozen_noise.defined()
                   ? transmit_with_noise(r.symbols, channel_.gain_h, frozen_noise)
                   : transmit(r.symbols, channel_, rng);
  r.reconstructed = codec_.decode(r.received);

  const std::size_t frames = images.dim(0);
  const std::size_t seq = decoder_.config().sequence_length;
  std::vector<Tensor> parts;
  for (std::size_t begin = 0; begin < frames; begin += seq) {
    const std::size_t end = std::min(frames, begin + seq);
    const Tensor counts = decoder_.decode_counts(slice_first(r.reconstructed, begin, end),
                                                 training, rng);
    parts.push_back(reshape(counts, {end - begin, 1}));
  }
  r.counts = reshape(concat_rows(parts), {frames});
  return r;
}

ParameterList SemComModel::parameters() const {
  ParameterList out = encoder_.parameters();
  auto codec = codec_.parameters();
  out.insert(out.end(), codec.begin(), codec.end());
  auto dec = decoder_.parameters();
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

ModelConfig SemComModel::config() const {
  return {encoder_.config(), channel_, decoder_.config()};
}

}  // namespace semcom
