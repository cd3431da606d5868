#include "semcom/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "semcom/config.hpp"
#include "semcom/error.hpp"

namespace semcom {

namespace {

const char* kModule = "training";
constexpr char kMagic[4] = {'S', 'E', 'M', 'C'};

static_assert(std::endian::native == std::endian::little, "little-endian host required");

class Writer {
 public:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void text(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void values(std::span<const real> v) { raw(v.data(), v.size() * sizeof(real)); }
  std::string& str() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : data_(data), size_(size) {}
  void raw(void* p, std::size_t n) {
    if (n > size_ - pos_) throw CorruptionError(kModule, "checkpoint truncated");
    std::memcpy(p, data_ + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
  double f64() { double v; raw(&v, sizeof v); return v; }
  std::string text() {
    const std::uint64_t n = u64();
    if (n > size_ - pos_) throw CorruptionError(kModule, "checkpoint truncated");
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<real> values(std::size_t n) {
    if (n > (size_ - pos_) / sizeof(real)) throw CorruptionError(kModule, "checkpoint truncated");
    std::vector<real> v(n);
    raw(v.data(), n * sizeof(real));
    return v;
  }
  bool done() const { return pos_ == size_; }

 private:
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void write_moment(Writer& w, const std::vector<Tensor>& moments, std::size_t i,
                  std::size_t numel) {
  if (i < moments.size() && moments[i].defined()) {
    w.values(moments[i].data());
  } else {
    for (std::size_t k = 0; k < numel; ++k) w.f64(0.0);
  }
}

}  // namespace

std::string checkpoint_bytes(const Trainer& trainer) {
  Settings settings;
  settings.train = trainer.config();
  settings.model = trainer.model().config();

  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.text(to_config_text(settings));

  const ParameterList params = trainer.model().parameters();
  w.u64(params.size());
  for (const auto& p : params) {
    w.text(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.ndim()));
    for (std::size_t d : p.value.shape()) w.u64(d);
  }
  for (const auto& p : params) w.values(p.value.data());

  const AdamState& adam = trainer.optimizer();
  w.u64(adam.step_count);
  w.f64(adam.beta1);
  w.f64(adam.beta2);
  w.f64(adam.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    write_moment(w, adam.first_moment, i, params[i].value.numel());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    write_moment(w, adam.second_moment, i, params[i].value.numel());
  }

  w.u64(trainer.epochs_completed());
  const auto best = trainer.best_validation();
  w.u32(best ? 1u : 0u);
  w.f64(best ? *best : 0.0);
  w.u64(trainer.best_epoch());
  std::ostringstream rng_state;
  rng_state << trainer.rng();
  w.text(rng_state.str());

  w.u32(crc_of(w.str().data(), w.str().size()));
  return std::move(w.str());
}

Trainer checkpoint_from_bytes(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CorruptionError(kModule, "not a checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body, 4);
  Reader r(bytes.data(), body);
  char magic[4];
  r.raw(magic, 4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CorruptionError(kModule, "unsupported checkpoint version " + std::to_string(version));
  }
  if (crc_of(bytes.data(), body) != stored_crc) {
    throw CorruptionError(kModule, "checkpoint checksum mismatch (truncated or corrupted)");
  }

  Settings settings;
  try {
    settings = parse_config_text(r.text());
  } catch (const ConfigError& e) {
    throw CorruptionError(kModule, std::string("checkpoint config unreadable: ") + e.what());
  }
  // Initial values are discarded; every parameter is overwritten below.
  Trainer trainer(SemComModel::build(settings.model, settings.train.seed), settings.train);

  const ParameterList params = trainer.model().parameters();
  const std::uint64_t count = r.u64();
  if (count != params.size()) {
    throw CorruptionError(kModule, "checkpoint has " + std::to_string(count) +
                                       " parameters, model expects " +
                                       std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const std::string name = r.text();
    if (name != p.name) {
      throw CorruptionError(kModule, "parameter '" + name + "' where '" + p.name + "' expected");
    }
    const std::uint32_t ndim = r.u32();
    Shape shape(ndim);
    for (auto& d : shape) d = r.u64();
    if (shape != p.value.shape()) {
      throw CorruptionError(kModule, "shape mismatch for '" + p.name + "': stored " +
                                         shape_str(shape) + ", model " +
                                         shape_str(p.value.shape()));
    }
  }
  std::vector<std::vector<real>> values, first, second;
  for (const auto& p : params) values.push_back(r.values(p.value.numel()));
  AdamState adam;
  adam.step_count = r.u64();
  adam.beta1 = r.f64();
  adam.beta2 = r.f64();
  adam.epsilon = r.f64();
  for (const auto& p : params) first.push_back(r.values(p.value.numel()));
  for (const auto& p : params) second.push_back(r.values(p.value.numel()));
  const std::uint64_t epochs = r.u64();
  const bool has_best = r.u32() != 0;
  const real best = r.f64();
  const std::uint64_t best_epoch = r.u64();
  Rng rng;
  std::istringstream rng_state(r.text());
  rng_state >> rng;
  if (!rng_state || !r.done()) throw CorruptionError(kModule, "malformed checkpoint trailer");

  // Everything parsed; only now mutate the trainer.
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor param = params[i].value;
    std::copy(values[i].begin(), values[i].end(), param.mutable_data().begin());
    adam.first_moment.push_back(Tensor::from_data(params[i].value.shape(), std::move(first[i])));
    adam.second_moment.push_back(
        Tensor::from_data(params[i].value.shape(), std::move(second[i])));
  }
  trainer.optimizer() = std::move(adam);
  trainer.rng() = rng;
  trainer.set_epochs_completed(epochs);
  if (has_best) trainer.record_validation(best, best_epoch);
  return trainer;
}

void checkpoint_save(const Trainer& trainer, const std::filesystem::path& path) {
  const std::string bytes = checkpoint_bytes(trainer);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(kModule, "cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(kModule, "failed writing checkpoint " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

Trainer checkpoint_load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingCheckpointError(kModule, "checkpoint not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingCheckpointError(kModule, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_bytes(ss.str());
}

}  // namespace semcom
