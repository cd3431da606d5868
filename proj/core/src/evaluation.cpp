#include "semcom/evaluation.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

#include "semcom/error.hpp"
#include "semcom/format.hpp"

namespace semcom {

namespace {

const char* kModule = "evaluation";

void check_pair(std::span<const real> preds, std::span<const real> gts) {
  if (preds.empty()) throw DomainError(kModule, "empty prediction list");
  if (preds.size() != gts.size()) {
    throw DomainError(kModule, "length mismatch: " + std::to_string(preds.size()) +
                                   " predictions vs " + std::to_string(gts.size()) +
                                   " ground truths");
  }
}

SemComModel at_snr(const SemComModel& model, real snr_db) {
  SemComModel m = model;  // shares parameter storage, copies settings
  m.channel().snr_db = snr_db;
  return m;
}

std::vector<real> decode_grouped(const SemanticDecoder& decoder, const Tensor& maps, Rng& rng) {
  const std::size_t frames = maps.dim(0);
  const std::size_t seq = decoder.config().sequence_length;
  std::vector<real> out;
  out.reserve(frames);
  for (std::size_t begin = 0; begin < frames; begin += seq) {
    const std::size_t end = std::min(frames, begin + seq);
    const Tensor counts = decoder.decode_counts(slice_first(maps, begin, end), false, rng);
    out.insert(out.end(), counts.data().begin(), counts.data().end());
  }
  return out;
}

std::vector<real> gt_counts(const FrameSet& frames) {
  const auto c = frames.counts.data();
  return {c.begin(), c.end()};
}

void put_u16(std::string& s, std::uint16_t v) { s.append(reinterpret_cast<const char*>(&v), 2); }
void put_f32(std::string& s, float v) { s.append(reinterpret_cast<const char*>(&v), 4); }

constexpr std::size_t kPayloadHeader = 12;

}  // namespace

real mae(std::span<const real> preds, std::span<const real> gts) {
  check_pair(preds, gts);
  real sum = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += std::abs(preds[i] - gts[i]);
  return sum / static_cast<real>(preds.size());
}

real mse(std::span<const real> preds, std::span<const real> gts) {
  check_pair(preds, gts);
  real sum = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const real d = preds[i] - gts[i];
    sum += d * d;
  }
  return sum / static_cast<real>(preds.size());
}

MetricsReport make_report(std::span<const real> preds, std::span<const real> gts, real snr_db,
                          real p) {
  return {mae(preds, gts), mse(preds, gts), preds.size(), snr_db, p};
}

std::vector<real> predict_counts(const SemComModel& model, const FrameSet& frames, real snr_db,
                                 std::uint64_t noise_seed, std::size_t batch_size) {
  if (batch_size == 0) throw DomainError(kModule, "batch_size must be positive");
  NoGradGuard guard;
  const SemComModel m = at_snr(model, snr_db);
  Rng rng(noise_seed);
  std::vector<real> out;
  out.reserve(frames.size());
  for (std::size_t begin = 0; begin < frames.size(); begin += batch_size) {
    const std::size_t end = std::min(frames.size(), begin + batch_size);
    const ForwardResult r = m.forward(frames.slice(begin, end).images, false, rng);
    out.insert(out.end(), r.counts.data().begin(), r.counts.data().end());
  }
  return out;
}

MetricsReport evaluate(const SemComModel& model, const FrameSet& frames, real snr_db,
                       std::uint64_t noise_seed, std::size_t batch_size) {
  if (frames.size() == 0) throw DatasetError(kModule, "no frames to evaluate");
  const auto preds = predict_counts(model, frames, snr_db, noise_seed, batch_size);
  return make_report(preds, gt_counts(frames), snr_db, model.decoder().config().p);
}

SweepResult p_sweep(const SemComModel& model, const FrameSet& frames,
                    std::span<const real> p_grid, real snr_db, std::uint64_t noise_seed,
                    std::size_t batch_size) {
  if (p_grid.empty()) throw DomainError(kModule, "empty p grid");
  if (frames.size() == 0) throw DatasetError(kModule, "no frames to evaluate");
  if (batch_size == 0) throw DomainError(kModule, "batch_size must be positive");
  for (real p : p_grid) {
    if (!(p >= 0 && p <= 1)) throw DomainError(kModule, "p outside [0, 1]");
  }
  NoGradGuard guard;
  const SemComModel m = at_snr(model, snr_db);
  Rng rng(noise_seed);
  std::vector<Tensor> received;
  for (std::size_t begin = 0; begin < frames.size(); begin += batch_size) {
    const std::size_t end = std::min(frames.size(), begin + batch_size);
    const Tensor images = frames.slice(begin, end).images;
    const Tensor symbols = m.codec().encode(m.encoder().encode(images));
    received.push_back(m.codec().decode(transmit(symbols, m.channel(), rng)));
  }
  const std::vector<real> gts = gt_counts(frames);

  SweepResult result;
  for (real p : p_grid) {
    SemanticDecoder decoder = m.decoder();
    decoder.set_p(p);
    std::vector<real> preds;
    preds.reserve(frames.size());
    for (const Tensor& z : received) {
      const auto part = decode_grouped(decoder, z, rng);
      preds.insert(preds.end(), part.begin(), part.end());
    }
    result.curve.push_back(make_report(preds, gts, snr_db, p));
  }
  for (std::size_t i = 1; i < result.curve.size(); ++i) {
    if (result.curve[i].mae < result.curve[result.argmin].mae) result.argmin = i;
  }
  return result;
}

std::vector<real> default_p_grid() {
  std::vector<real> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(static_cast<real>(i) / 10.0);
  return grid;
}

OverheadReport overhead_from_sizes(std::uint64_t raw_bytes, std::uint64_t encoded_bytes) {
  if (raw_bytes == 0) throw DomainError(kModule, "raw size is zero");
  OverheadReport r;
  r.raw_bytes = raw_bytes;
  r.encoded_bytes = encoded_bytes;
  r.reduction_pct = 100.0 * (static_cast<real>(raw_bytes) - static_cast<real>(encoded_bytes)) /
                    static_cast<real>(raw_bytes);
  return r;
}

std::uint64_t kib(real amount) { return static_cast<std::uint64_t>(std::llround(amount * 1024.0)); }
std::uint64_t mib(real amount) {
  return static_cast<std::uint64_t>(std::llround(amount * 1024.0 * 1024.0));
}

std::string encode_density_payload(const DensityMap& map, const PayloadConfig& cfg) {
  if (map.height > 0xffff || map.width > 0xffff) {
    throw DomainError(kModule, "density map too large for payload header");
  }
  if (map.values.size() != map.height * map.width) {
    throw ShapeError(kModule, "density map values do not match its size");
  }
  real lo = 0, hi = 0;
  if (!map.values.empty()) {
    const auto [mn, mx] = std::minmax_element(map.values.begin(), map.values.end());
    lo = *mn;
    hi = *mx;
  }
  const float flo = static_cast<float>(lo);
  const float fhi = static_cast<float>(hi);
  std::vector<unsigned char> codes(map.values.size(), 0);
  if (fhi > flo) {
    const real range = static_cast<real>(fhi) - static_cast<real>(flo);
    for (std::size_t i = 0; i < codes.size(); ++i) {
      const real t = (map.values[i] - static_cast<real>(flo)) / range;
      codes[i] = static_cast<unsigned char>(std::clamp(std::lround(t * 255.0), 0L, 255L));
    }
  }
  uLongf packed_size = compressBound(static_cast<uLong>(codes.size()));
  std::string packed(packed_size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size, codes.data(),
                static_cast<uLong>(codes.size()), cfg.compression_level) != Z_OK) {
    throw Error(kModule, "deflate failed");
  }
  packed.resize(packed_size);

  std::string out;
  put_u16(out, static_cast<std::uint16_t>(map.height));
  put_u16(out, static_cast<std::uint16_t>(map.width));
  put_f32(out, flo);
  put_f32(out, fhi);
  return out + packed;
}

DensityMap decode_density_payload(const std::string& payload) {
  if (payload.size() < kPayloadHeader) throw CorruptionError(kModule, "payload truncated");
  std::uint16_t h, w;
  float lo, hi;
  std::memcpy(&h, payload.data(), 2);
  std::memcpy(&w, payload.data() + 2, 2);
  std::memcpy(&lo, payload.data() + 4, 4);
  std::memcpy(&hi, payload.data() + 8, 4);
  std::vector<unsigned char> codes(static_cast<std::size_t>(h) * w);
  uLongf size = static_cast<uLongf>(codes.size());
  const int rc = uncompress(codes.data(), &size,
                            reinterpret_cast<const Bytef*>(payload.data() + kPayloadHeader),
                            static_cast<uLong>(payload.size() - kPayloadHeader));
  if (rc != Z_OK || size != codes.size()) throw CorruptionError(kModule, "payload corrupted");
  DensityMap map = DensityMap::zeros(h, w);
  const real range = static_cast<real>(hi) - static_cast<real>(lo);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    map.values[i] = static_cast<real>(lo) + range * static_cast<real>(codes[i]) / 255.0;
  }
  return map;
}

OverheadReport overhead(const std::vector<AnnotatedFrame>& frames,
                        const std::vector<DensityMap>& maps, const PayloadConfig& cfg) {
  if (frames.size() != maps.size()) {
    throw ShapeError(kModule, "need one density map per frame (" + std::to_string(frames.size()) +
                                  " frames, " + std::to_string(maps.size()) + " maps)");
  }
  std::uint64_t raw = 0, encoded = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(frames[i].image_path, ec);
    if (ec) {
      throw DatasetError(kModule, "image file missing for frame " + frames[i].frame_id + ": " +
                                      frames[i].image_path.string());
    }
    raw += size;
    encoded += encode_density_payload(maps[i], cfg).size();
  }
  return overhead_from_sizes(raw, encoded);
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsReport>& runs,
                       const std::vector<std::string>& labels) {
  if (labels.size() != runs.size()) throw DomainError(kModule, "one label per run required");
  std::ostringstream os;
  os << "label,mae,mse,i_count,snr_db,p\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    os << labels[i] << ',' << format_real(r.mae) << ',' << format_real(r.mse) << ',' << r.i_count
       << ',' << format_real(r.snr_db) << ',' << format_real(r.p) << '\n';
  }
  out << os.str();
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
  std::ostringstream os;
  os << "p,mae,mse,i_count,snr_db\n";
  for (const auto& r : sweep.curve) {
    os << format_real(r.p) << ',' << format_real(r.mae) << ',' << format_real(r.mse) << ','
       << r.i_count << ',' << format_real(r.snr_db) << '\n';
  }
  out << os.str();
}

void write_overhead_csv(std::ostream& out, const OverheadReport& report) {
  std::ostringstream os;
  os << "raw_bytes,encoded_bytes,reduction_pct\n"
     << report.raw_bytes << ',' << report.encoded_bytes << ',' << std::fixed
     << std::setprecision(4) << report.reduction_pct << '\n';
  out << os.str();
}

std::string compare_report(const std::vector<MetricsReport>& runs,
                           const std::vector<std::string>& labels, bool with_reference) {
  if (runs.empty()) throw DomainError(kModule, "nothing to report");
  if (labels.size() != runs.size()) throw DomainError(kModule, "one label per run required");
  std::ostringstream os;
  os << std::left << std::setw(20) << "model" << std::right << std::setw(10) << "MAE"
     << std::setw(10) << "MSE" << std::setw(8) << "I" << '\n';
  os << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    os << std::left << std::setw(20) << labels[i] << std::right << std::setw(10) << runs[i].mae
       << std::setw(10) << runs[i].mse << std::setw(8) << runs[i].i_count << '\n';
  }
  if (with_reference) {
    os << "-- reference (TRANCOS) --\n";
    for (const auto& ref : kReferenceResults) {
      os << std::left << std::setw(20) << ref.label << std::right << std::setw(10) << ref.mae
         << std::setw(10) << ref.mse << std::setw(8) << "-" << '\n';
    }
  }
  return os.str();
}

}  // namespace semcom
