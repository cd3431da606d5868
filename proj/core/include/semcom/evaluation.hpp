#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "semcom/data.hpp"
#include "semcom/model.hpp"

namespace semcom {

// ---- metrics ----------------------------------------------------------------

/// sum_i |pred_i - gt_i| / I. Throws DomainError on empty or mismatched input.
real mae(std::span<const real> preds, std::span<const real> gts);
/// sum_i (pred_i - gt_i)^2 / I.
real mse(std::span<const real> preds, std::span<const real> gts);

struct MetricsReport {
  real mae = 0;
  real mse = 0;
  std::size_t i_count = 0;
  real snr_db = 0;
  real p = 0;
};

MetricsReport make_report(std::span<const real> preds, std::span<const real> gts, real snr_db,
                          real p);

/// Predicted counts for every frame, run in batches of `batch_size` with
/// dropout off and channel noise drawn at `snr_db` from Rng(noise_seed).
std::vector<real> predict_counts(const SemComModel& model, const FrameSet& frames, real snr_db,
                                 std::uint64_t noise_seed, std::size_t batch_size = 8);

/// MAE / MSE over all frames (I = frames.size()) at the model's current p.
MetricsReport evaluate(const SemComModel& model, const FrameSet& frames, real snr_db,
                       std::uint64_t noise_seed, std::size_t batch_size = 8);

// ---- p sweep ----------------------------------------------------------------

struct SweepResult {
  std::vector<MetricsReport> curve;  // one entry per grid point, in grid order
  std::size_t argmin = 0;            // index of the lowest MAE (first on ties)
  real best_p() const { return curve.at(argmin).p; }
};

/// Encodes and transmits every frame once, then decodes the same received
/// maps at each p. The model is never modified. Each entry equals
/// evaluate() at that p with the same seed and batch size.
SweepResult p_sweep(const SemComModel& model, const FrameSet& frames,
                    std::span<const real> p_grid, real snr_db, std::uint64_t noise_seed,
                    std::size_t batch_size = 8);

/// 0, 0.1, ..., 1.0
std::vector<real> default_p_grid();

// ---- overhead ---------------------------------------------------------------

struct OverheadReport {
  std::uint64_t raw_bytes = 0;
  std::uint64_t encoded_bytes = 0;
  real reduction_pct = 0;  // 100 (raw - encoded) / raw
};

OverheadReport overhead_from_sizes(std::uint64_t raw_bytes, std::uint64_t encoded_bytes);

/// Size helpers in 1024-based units, rounded to the nearest byte.
std::uint64_t kib(real amount);
std::uint64_t mib(real amount);

/// Payload convention for a transmitted density map: 8-bit quantisation of
/// the map's [min, max] range followed by zlib deflate.
struct PayloadConfig {
  int compression_level = 9;
};

/// u16 height, u16 width, f32 min, f32 max, then the deflated 8-bit codes.
std::string encode_density_payload(const DensityMap& map, const PayloadConfig& cfg = {});
/// Dequantised map; throws CorruptionError on a malformed payload.
DensityMap decode_density_payload(const std::string& payload);

/// raw = on-disk size of each frame's image file; encoded = payload size of
/// each map. Throws DatasetError when an image file is missing.
OverheadReport overhead(const std::vector<AnnotatedFrame>& frames,
                        const std::vector<DensityMap>& maps, const PayloadConfig& cfg = {});

// ---- reports ----------------------------------------------------------------

struct ReferenceRow {
  const char* label;
  real mae;
  real mse;
};

/// Reference counting results on TRANCOS, used as a static comparison baseline.
inline constexpr std::array<ReferenceRow, 4> kReferenceResults = {{
    {"GRU", 11.88, 77.79},
    {"LSTM", 10.78, 67.74},
    {"FCN-rLSTM", 7.42, 43.28},
    {"CNN-LSTM", 6.23, 38.15},
}};

/// label,mae,mse,i_count,snr_db,p
void write_metrics_csv(std::ostream& out, const std::vector<MetricsReport>& runs,
                       const std::vector<std::string>& labels);
/// p,mae,mse,i_count,snr_db
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
/// raw_bytes,encoded_bytes,reduction_pct
void write_overhead_csv(std::ostream& out, const OverheadReport& report);

/// Plain-text table of the runs in input order, optionally followed by the
/// reference rows.
std::string compare_report(const std::vector<MetricsReport>& runs,
                           const std::vector<std::string>& labels, bool with_reference = true);

}  // namespace semcom
