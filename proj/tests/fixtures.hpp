#pragma once

#include <cstdint>

#include "semcom/data.hpp"
#include "semcom/model.hpp"
#include "semcom/training.hpp"

namespace semcom::test {

/// Small synthetic scenes sized for the micro pipeline.
inline SyntheticConfig micro_scenes(std::size_t frames, std::uint64_t seed, std::size_t size = 8) {
  SyntheticConfig sc;
  sc.image_height = sc.image_width = size;
  sc.frames = frames;
  sc.seed = seed;
  sc.blob_sigma = 1.0;
  sc.count_min = 0;
  sc.count_max = 3;
  return sc;
}

inline FrameSet micro_frames(std::size_t frames, std::uint64_t seed, std::size_t size = 8) {
  const SyntheticConfig sc = micro_scenes(frames, seed, size);
  return to_frame_set(synth_generate(sc), sc.blob_sigma);
}

inline TrainConfig micro_train_config(std::uint64_t seed, std::size_t epochs = 3) {
  TrainConfig t;
  t.seed = seed;
  t.epochs = epochs;
  t.batch_size = 4;
  t.learning_rate = 0.003;
  return t;
}

inline Trainer micro_trainer(std::uint64_t seed, std::size_t epochs = 3) {
  return Trainer(SemComModel::build(micro_model_config(), seed), micro_train_config(seed, epochs));
}

}  // namespace semcom::test
