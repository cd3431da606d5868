#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "semcom/adam.hpp"
#include "semcom/data.hpp"
#include "semcom/model.hpp"

namespace semcom {

/// Threshold value meaning "never stop early on the training loss".
inline constexpr real kNoLossThreshold = std::numeric_limits<real>::infinity();

/// Joint-training hyper-parameters. Defaults follow the reference setup:
/// lr 0.001, dropout 0.1, 100 epochs, batch 8, lambda 0.001, p 0.8.
struct TrainConfig {
  real learning_rate = 0.001;
  real dropout = 0.1;
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  real lambda = 0.001;
  real p = 0.8;
  real loss_threshold = kNoLossThreshold;
  std::uint64_t seed = 0;
  /// One optimizer step per epoch over the accumulated gradient instead of one per batch.
  bool per_epoch_update = false;
};

void validate(const TrainConfig& cfg);

enum class Split { train, validation };
const char* split_name(Split split);

struct LossReport {
  real enc_loss = 0;
  real dec_loss = 0;
  real total = 0;  // enc_loss + lambda * dec_loss
  std::size_t epoch = 0;
  Split split = Split::train;
};

struct BatchLosses {
  real enc_loss = 0;
  real dec_loss = 0;
  real total = 0;
};

/// Owns the model, optimizer state and RNG of one training run. All
/// randomness (channel noise, dropout) is drawn from the trainer's generator,
/// so a run is a pure function of the seed.
class Trainer {
 public:
  Trainer(SemComModel model, TrainConfig cfg);

  /// Forward + backward + Adam step on one batch; returns the batch losses
  /// measured before the update.
  BatchLosses train_step(const FrameSet& batch);

  /// Losses of `batch` under the current parameters, without updating.
  /// When `frozen_noise` is given it replaces the channel draw.
  BatchLosses batch_losses(const FrameSet& batch, bool training, Rng& rng,
                           const Tensor& frozen_noise = {}) const;

  /// One pass over `frames` in batches of cfg.batch_size; increments the epoch.
  LossReport train_epoch(const FrameSet& frames);

  /// Validation losses with channel noise on and dropout off. Noise is drawn
  /// from a generator derived from (seed, epoch) so evaluation never perturbs
  /// the training stream.
  LossReport evaluate(const FrameSet& frames) const;

  SemComModel& model() { return model_; }
  const SemComModel& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }
  AdamState& optimizer() { return adam_; }
  const AdamState& optimizer() const { return adam_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

  std::size_t epochs_completed() const { return epochs_completed_; }
  void set_epochs_completed(std::size_t n) { epochs_completed_ = n; }
  std::optional<real> best_validation() const { return best_validation_; }
  std::size_t best_epoch() const { return best_epoch_; }
  void record_validation(real loss, std::size_t epoch);

 private:
  SemComModel model_;
  TrainConfig cfg_;
  std::vector<Tensor> params_;
  AdamState adam_;
  Rng rng_;
  std::size_t epochs_completed_ = 0;
  std::optional<real> best_validation_;
  std::size_t best_epoch_ = 0;
};

struct FitOptions {
  /// When set, checkpoint_best.semc and checkpoint_final.semc are written here.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Skip validation (used when no validation split exists).
  bool validate = true;
};

struct FitResult {
  std::vector<LossReport> history;
  std::size_t epochs_run = 0;
  bool stopped_by_threshold = false;
};

/// Runs epochs while epoch <= K and the training L_count stays at or above
/// the threshold. Throws DivergenceError on a non-finite loss.
FitResult fit(Trainer& trainer, const FrameSet& train, const FrameSet& validation,
              const FitOptions& options = {});

/// epoch,split,enc_loss,dec_loss,total
void write_loss_csv(std::ostream& out, const std::vector<LossReport>& history);

}  // namespace semcom
