#include "semcom/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "semcom/error.hpp"
#include "semcom/format.hpp"

namespace semcom {

namespace {

const char* kModule = "cli";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& expected,
                            const std::string& value) {
  throw ConfigError(kModule, "key '" + key + "': expected " + expected + ", got '" + value + "'");
}

real parse_real(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const real v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE || std::isnan(v)) {
    bad_value(key, "a real number", value);
  }
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& value, bool allow_zero) {
  const std::string expected = allow_zero ? "a non-negative integer" : "a positive integer";
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
    bad_value(key, expected, value);
  }
  errno = 0;
  const unsigned long long v = std::strtoull(value.c_str(), nullptr, 10);
  if (errno == ERANGE || (!allow_zero && v == 0)) bad_value(key, expected, value);
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, "true or false", value);
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value,
                                    bool allow_empty) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_count(key, trim(item), false));
  if (out.empty() && !allow_empty) bad_value(key, "a comma-separated list of positive integers", value);
  return out;
}

real check_range(const std::string& key, real v, real lo, real hi, bool hi_inclusive,
                 const std::string& value) {
  if (!(v >= lo) || (hi_inclusive ? !(v <= hi) : !(v < hi))) {
    std::ostringstream os;
    os << "a value in [" << lo << ", " << hi << (hi_inclusive ? "]" : ")");
    bad_value(key, os.str(), value);
  }
  return v;
}

std::string fmt_real(real v) { return format_real(v); }

std::string fmt_list(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

struct Key {
  const char* name;
  std::function<void(Settings&, const std::string&)> set;
  std::function<std::string(const Settings&)> get;
};

const std::vector<Key>& keys() {
  using S = Settings;
  using V = const std::string&;
  static const std::vector<Key> table = {
      // training
      {"learning_rate",
       [](S& s, V v) {
         s.train.learning_rate = parse_real("learning_rate", v);
         if (!(s.train.learning_rate > 0)) bad_value("learning_rate", "a positive real", v);
       },
       [](const S& s) { return fmt_real(s.train.learning_rate); }},
      {"dropout",
       [](S& s, V v) { s.train.dropout = check_range("dropout", parse_real("dropout", v), 0, 1, false, v); },
       [](const S& s) { return fmt_real(s.train.dropout); }},
      {"epochs", [](S& s, V v) { s.train.epochs = parse_count("epochs", v, false); },
       [](const S& s) { return std::to_string(s.train.epochs); }},
      {"batch_size", [](S& s, V v) { s.train.batch_size = parse_count("batch_size", v, false); },
       [](const S& s) { return std::to_string(s.train.batch_size); }},
      {"lambda",
       [](S& s, V v) {
         s.train.lambda = parse_real("lambda", v);
         if (!(s.train.lambda >= 0) || std::isinf(s.train.lambda)) {
           bad_value("lambda", "a non-negative real", v);
         }
       },
       [](const S& s) { return fmt_real(s.train.lambda); }},
      {"p", [](S& s, V v) { s.train.p = check_range("p", parse_real("p", v), 0, 1, true, v); },
       [](const S& s) { return fmt_real(s.train.p); }},
      {"loss_threshold",
       [](S& s, V v) {
         s.train.loss_threshold = parse_real("loss_threshold", v);
         if (!(s.train.loss_threshold > 0)) bad_value("loss_threshold", "a positive real or inf", v);
       },
       [](const S& s) { return fmt_real(s.train.loss_threshold); }},
      {"seed", [](S& s, V v) { s.train.seed = parse_count("seed", v, true); },
       [](const S& s) { return std::to_string(s.train.seed); }},
      {"per_epoch_update",
       [](S& s, V v) { s.train.per_epoch_update = parse_bool("per_epoch_update", v); },
       [](const S& s) { return std::string(s.train.per_epoch_update ? "true" : "false"); }},
      // semantic encoder
      {"image_height",
       [](S& s, V v) { s.model.encoder.input_height = parse_count("image_height", v, false); },
       [](const S& s) { return std::to_string(s.model.encoder.input_height); }},
      {"image_width",
       [](S& s, V v) { s.model.encoder.input_width = parse_count("image_width", v, false); },
       [](const S& s) { return std::to_string(s.model.encoder.input_width); }},
      {"input_channels",
       [](S& s, V v) {
         const auto c = parse_count("input_channels", v, false);
         if (c != 1 && c != 3) bad_value("input_channels", "1 or 3", v);
         s.model.encoder.input_channels = c;
       },
       [](const S& s) { return std::to_string(s.model.encoder.input_channels); }},
      {"block_channels",
       [](S& s, V v) { s.model.encoder.block_channels = parse_list("block_channels", v, true); },
       [](const S& s) { return fmt_list(s.model.encoder.block_channels); }},
      {"sandwich_channels",
       [](S& s, V v) {
         s.model.encoder.sandwich_channels = parse_count("sandwich_channels", v, false);
       },
       [](const S& s) { return std::to_string(s.model.encoder.sandwich_channels); }},
      {"atrous_rate",
       [](S& s, V v) {
         s.model.encoder.atrous_rate = static_cast<int>(parse_count("atrous_rate", v, false));
       },
       [](const S& s) { return std::to_string(s.model.encoder.atrous_rate); }},
      {"reweight_channels",
       [](S& s, V v) {
         s.model.encoder.reweight_channels = parse_count("reweight_channels", v, false);
       },
       [](const S& s) { return std::to_string(s.model.encoder.reweight_channels); }},
      {"deconv_channels",
       [](S& s, V v) {
         const auto list = parse_list("deconv_channels", v, false);
         if (list.size() != 2) bad_value("deconv_channels", "exactly two channel counts", v);
         s.model.encoder.deconv_channels = {list[0], list[1]};
       },
       [](const S& s) {
         return fmt_list({s.model.encoder.deconv_channels[0], s.model.encoder.deconv_channels[1]});
       }},
      {"output_activation",
       [](S& s, V v) {
         if (v == "softplus") s.model.encoder.output_activation = OutputActivation::softplus;
         else if (v == "relu") s.model.encoder.output_activation = OutputActivation::relu;
         else bad_value("output_activation", "softplus or relu", v);
       },
       [](const S& s) { return std::string(activation_name(s.model.encoder.output_activation)); }},
      {"density_scale",
       [](S& s, V v) {
         const real scale = parse_real("density_scale", v);
         if (!(scale > 0) || std::isinf(scale)) bad_value("density_scale", "a positive finite real", v);
         s.model.encoder.density_scale = scale;
       },
       [](const S& s) { return fmt_real(s.model.encoder.density_scale); }},
      // channel
      {"snr_db", [](S& s, V v) { s.model.channel.snr_db = parse_real("snr_db", v); },
       [](const S& s) { return fmt_real(s.model.channel.snr_db); }},
      {"gain_h",
       [](S& s, V v) {
         s.model.channel.gain_h = parse_real("gain_h", v);
         if (std::isinf(s.model.channel.gain_h)) bad_value("gain_h", "a finite real", v);
       },
       [](const S& s) { return fmt_real(s.model.channel.gain_h); }},
      {"symbols", [](S& s, V v) { s.model.channel.symbols = parse_count("symbols", v, true); },
       [](const S& s) { return std::to_string(s.model.channel.symbols); }},
      // semantic decoder
      {"lstm_layers", [](S& s, V v) { s.model.decoder.layers = parse_count("lstm_layers", v, false); },
       [](const S& s) { return std::to_string(s.model.decoder.layers); }},
      {"lstm_hidden", [](S& s, V v) { s.model.decoder.hidden = parse_count("lstm_hidden", v, false); },
       [](const S& s) { return std::to_string(s.model.decoder.hidden); }},
      {"lstm_input",
       [](S& s, V v) { s.model.decoder.input_size = parse_count("lstm_input", v, false); },
       [](const S& s) { return std::to_string(s.model.decoder.input_size); }},
      {"sequence_length",
       [](S& s, V v) {
         s.model.decoder.sequence_length = parse_count("sequence_length", v, false);
       },
       [](const S& s) { return std::to_string(s.model.decoder.sequence_length); }},
      // data
      {"blob_sigma",
       [](S& s, V v) {
         s.data.blob_sigma = parse_real("blob_sigma", v);
         if (!(s.data.blob_sigma > 0) || std::isinf(s.data.blob_sigma)) {
           bad_value("blob_sigma", "a positive real", v);
         }
       },
       [](const S& s) { return fmt_real(s.data.blob_sigma); }},
      {"synth_frames", [](S& s, V v) { s.data.synth_frames = parse_count("synth_frames", v, false); },
       [](const S& s) { return std::to_string(s.data.synth_frames); }},
      {"synth_count_min",
       [](S& s, V v) { s.data.synth_count_min = parse_count("synth_count_min", v, true); },
       [](const S& s) { return std::to_string(s.data.synth_count_min); }},
      {"synth_count_max",
       [](S& s, V v) { s.data.synth_count_max = parse_count("synth_count_max", v, true); },
       [](const S& s) { return std::to_string(s.data.synth_count_max); }},
      {"synth_noise",
       [](S& s, V v) {
         s.data.synth_noise = check_range("synth_noise", parse_real("synth_noise", v), 0, 1, true, v);
       },
       [](const S& s) { return fmt_real(s.data.synth_noise); }},
      {"test_frames", [](S& s, V v) { s.data.test_frames = parse_count("test_frames", v, true); },
       [](const S& s) { return std::to_string(s.data.test_frames); }},
  };
  return table;
}

}  // namespace

ModelConfig resolved_model_config(const Settings& settings) {
  ModelConfig m = settings.model;
  m.decoder.p = settings.train.p;
  m.decoder.dropout = settings.train.dropout;
  m.channel.seed = settings.train.seed;
  return m;
}

SyntheticConfig synthetic_config(const Settings& settings) {
  SyntheticConfig s;
  s.count_min = settings.data.synth_count_min;
  s.count_max = settings.data.synth_count_max;
  s.blob_sigma = settings.data.blob_sigma;
  s.image_height = settings.model.encoder.input_height;
  s.image_width = settings.model.encoder.input_width;
  s.channels = settings.model.encoder.input_channels;
  s.background_noise = settings.data.synth_noise;
  s.seed = settings.train.seed;
  s.frames = settings.data.synth_frames;
  return s;
}

SplitSpec split_spec(const Settings& settings) {
  SplitSpec spec;
  if (settings.data.test_frames > 0) spec.test = settings.data.test_frames;
  return spec;
}

Settings parse_config_text(const std::string& text, bool strict) {
  Settings settings;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(kModule, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool known = false;
    for (const auto& k : keys()) {
      if (key == k.name) {
        k.set(settings, value);
        known = true;
        break;
      }
    }
    if (!known && strict) {
      throw ConfigError(kModule, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (settings.data.synth_count_max < settings.data.synth_count_min) {
    throw ConfigError(kModule, "key 'synth_count_max': must be >= synth_count_min");
  }
  validate(settings.model.encoder);
  return settings;
}

Settings parse_config(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw ConfigError(kModule, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), strict);
}

std::string to_config_text(const Settings& settings) {
  std::string out;
  for (const auto& k : keys()) {
    out += k.name;
    out += " = ";
    out += k.get(settings);
    out += '\n';
  }
  return out;
}

}  // namespace semcom
