#include "semcom/training.hpp"

#include <cmath>

#include "semcom/checkpoint.hpp"
#include "semcom/error.hpp"
#include "semcom/format.hpp"
#include "semcom/losses.hpp"

namespace semcom {

namespace {

const char* kModule = "training";

constexpr std::uint64_t kTrainStream = 0x7261696eULL;
constexpr std::uint64_t kValidationStream = 0x76616c69ULL;

void require_finite(const BatchLosses& l) {
  if (!std::isfinite(l.enc_loss) || !std::isfinite(l.dec_loss) || !std::isfinite(l.total)) {
    throw DivergenceError(kModule, "loss became non-finite (enc " + std::to_string(l.enc_loss) +
                                       ", dec " + std::to_string(l.dec_loss) + ")");
  }
}

struct LossTensors {
  Tensor enc, dec, total;
};

LossTensors compute_losses(const SemComModel& model, const FrameSet& batch, real lambda,
                           bool training, Rng& rng, const Tensor& frozen_noise) {
  const ForwardResult r = model.forward(batch.images, training, rng, frozen_noise);
  LossTensors l;
  l.enc = encoder_loss(r.density, batch.densities);
  l.dec = decoder_loss(r.counts, batch.counts);
  l.total = total_loss(l.enc, l.dec, lambda);
  return l;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0)) throw ConfigError(kModule, "learning_rate must be positive");
  if (!(cfg.dropout >= 0 && cfg.dropout < 1)) throw ConfigError(kModule, "dropout outside [0, 1)");
  if (cfg.epochs == 0) throw ConfigError(kModule, "epochs must be positive");
  if (cfg.batch_size == 0) throw ConfigError(kModule, "batch_size must be positive");
  if (!(cfg.lambda >= 0)) throw ConfigError(kModule, "lambda must be non-negative");
  if (!(cfg.p >= 0 && cfg.p <= 1)) throw ConfigError(kModule, "p outside [0, 1]");
  if (std::isnan(cfg.loss_threshold)) throw ConfigError(kModule, "loss_threshold is NaN");
}

const char* split_name(Split split) { return split == Split::train ? "train" : "validation"; }

Trainer::Trainer(SemComModel model, TrainConfig cfg)
    : model_(std::move(model)), cfg_(cfg), rng_(cfg.seed ^ kTrainStream) {
  validate(cfg_);
  model_.decoder().set_p(cfg_.p);
  model_.decoder().set_dropout(cfg_.dropout);
  params_ = tensors_of(model_.parameters());
  adam_ = make_adam_state(params_);
}

BatchLosses Trainer::batch_losses(const FrameSet& batch, bool training, Rng& rng,
                                  const Tensor& frozen_noise) const {
  NoGradGuard guard;
  const LossTensors l = compute_losses(model_, batch, cfg_.lambda, training, rng, frozen_noise);
  return {l.enc.item(), l.dec.item(), l.total.item()};
}

BatchLosses Trainer::train_step(const FrameSet& batch) {
  for (auto& p : params_) p.zero_grad();
  const LossTensors l = compute_losses(model_, batch, cfg_.lambda, true, rng_, {});
  BatchLosses out{l.enc.item(), l.dec.item(), l.total.item()};
  require_finite(out);
  backward(l.total);
  adam_step(params_, adam_, cfg_.learning_rate);
  return out;
}

LossReport Trainer::train_epoch(const FrameSet& frames) {
  const std::size_t n = frames.size();
  if (n == 0) throw DatasetError(kModule, "empty training split");
  real enc_sum = 0, dec_sum = 0;
  if (cfg_.per_epoch_update) {
    for (auto& p : params_) p.zero_grad();
  }
  for (std::size_t begin = 0; begin < n; begin += cfg_.batch_size) {
    const std::size_t end = std::min(n, begin + cfg_.batch_size);
    const FrameSet batch = frames.slice(begin, end);
    const real weight = static_cast<real>(end - begin);
    BatchLosses b;
    if (cfg_.per_epoch_update) {
      const LossTensors l = compute_losses(model_, batch, cfg_.lambda, true, rng_, {});
      b = {l.enc.item(), l.dec.item(), l.total.item()};
      require_finite(b);
      backward(scale(l.total, weight / static_cast<real>(n)));
    } else {
      b = train_step(batch);
    }
    enc_sum += b.enc_loss * weight;
    dec_sum += b.dec_loss * weight;
  }
  if (cfg_.per_epoch_update) adam_step(params_, adam_, cfg_.learning_rate);
  ++epochs_completed_;

  LossReport report;
  report.epoch = epochs_completed_;
  report.split = Split::train;
  report.enc_loss = enc_sum / static_cast<real>(n);
  report.dec_loss = dec_sum / static_cast<real>(n);
  report.total = total_loss(report.enc_loss, report.dec_loss, cfg_.lambda);
  return report;
}

LossReport Trainer::evaluate(const FrameSet& frames) const {
  const std::size_t n = frames.size();
  if (n == 0) throw DatasetError(kModule, "empty evaluation split");
  Rng rng((cfg_.seed ^ kValidationStream) + epochs_completed_);
  real enc_sum = 0, dec_sum = 0;
  for (std::size_t begin = 0; begin < n; begin += cfg_.batch_size) {
    const std::size_t end = std::min(n, begin + cfg_.batch_size);
    const BatchLosses b = batch_losses(frames.slice(begin, end), false, rng);
    require_finite(b);
    const real weight = static_cast<real>(end - begin);
    enc_sum += b.enc_loss * weight;
    dec_sum += b.dec_loss * weight;
  }
  LossReport report;
  report.epoch = epochs_completed_;
  report.split = Split::validation;
  report.enc_loss = enc_sum / static_cast<real>(n);
  report.dec_loss = dec_sum / static_cast<real>(n);
  report.total = total_loss(report.enc_loss, report.dec_loss, cfg_.lambda);
  return report;
}

void Trainer::record_validation(real loss, std::size_t epoch) {
  if (!best_validation_ || loss < *best_validation_) {
    best_validation_ = loss;
    best_epoch_ = epoch;
  }
}

FitResult fit(Trainer& trainer, const FrameSet& train, const FrameSet& validation,
              const FitOptions& options) {
  const TrainConfig& cfg = trainer.config();
  const bool threshold_enabled = !(std::isinf(cfg.loss_threshold) && cfg.loss_threshold > 0);
  const bool run_validation = options.validate && validation.size() > 0;
  FitResult result;
  while (trainer.epochs_completed() < cfg.epochs) {
    const LossReport tr = trainer.train_epoch(train);
    result.history.push_back(tr);
    ++result.epochs_run;
    if (run_validation) {
      const LossReport va = trainer.evaluate(validation);
      result.history.push_back(va);
      const bool improved = !trainer.best_validation() || va.total < *trainer.best_validation();
      trainer.record_validation(va.total, va.epoch);
      if (improved && options.checkpoint_dir) {
        checkpoint_save(trainer, *options.checkpoint_dir / "checkpoint_best.semc");
      }
    }
    if (threshold_enabled && tr.total < cfg.loss_threshold) {
      result.stopped_by_threshold = true;
      break;
    }
  }
  if (options.checkpoint_dir) {
    checkpoint_save(trainer, *options.checkpoint_dir / "checkpoint_final.semc");
  }
  return result;
}

void write_loss_csv(std::ostream& out, const std::vector<LossReport>& history) {
  out << "epoch,split,enc_loss,dec_loss,total\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << split_name(r.split) << ',' << format_real(r.enc_loss) << ','
        << format_real(r.dec_loss) << ',' << format_real(r.total) << '\n';
  }
}

}  // namespace semcom
