#include "semcom/decoder.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

namespace {

const char* kModule = "semantic-decoder";

Tensor init_uniform(Shape shape, real bound, Rng& rng) {
  return uniform(std::move(shape), -bound, bound, rng, true);
}

Tensor gate_preactivation(const Tensor& x, const Tensor& h, const Tensor& W_x, const Tensor& W_h,
                          const Tensor& bias) {
  return add_row_bias(add(matmul(x, W_x), matmul(h, W_h)), bias);
}

}  // namespace

LSTMCellParams LSTMCellParams::init(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
  if (input_size == 0 || hidden_size == 0) {
    throw ConfigError(kModule, "LSTM sizes must be positive");
  }
  const real bound = 1.0 / std::sqrt(static_cast<real>(hidden_size));
  LSTMCellParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  const std::size_t in = input_size, hid = hidden_size;
  p.W_xi = init_uniform({in, hid}, bound, rng);
  p.W_hi = init_uniform({hid, hid}, bound, rng);
  p.w_ci = init_uniform({hid}, bound, rng);
  p.b_i = Tensor::zeros({hid}, true);
  p.W_xf = init_uniform({in, hid}, bound, rng);
  p.W_hf = init_uniform({hid, hid}, bound, rng);
  p.w_cf = init_uniform({hid}, bound, rng);
  p.b_f = Tensor::zeros({hid}, true);
  p.W_xo = init_uniform({in, hid}, bound, rng);
  p.W_ho = init_uniform({hid, hid}, bound, rng);
  p.w_co = init_uniform({hid}, bound, rng);
  p.b_o = Tensor::zeros({hid}, true);
  p.W_xc = init_uniform({in, hid}, bound, rng);
  p.W_hc = init_uniform({hid, hid}, bound, rng);
  p.b_c = Tensor::zeros({hid}, true);
  return p;
}

LSTMCellParams LSTMCellParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  LSTMCellParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  const std::size_t in = input_size, hid = hidden_size;
  for (Tensor* t : {&p.W_xi, &p.W_xf, &p.W_xo, &p.W_xc}) *t = Tensor::zeros({in, hid}, true);
  for (Tensor* t : {&p.W_hi, &p.W_hf, &p.W_ho, &p.W_hc}) *t = Tensor::zeros({hid, hid}, true);
  for (Tensor* t : {&p.w_ci, &p.w_cf, &p.w_co, &p.b_i, &p.b_f, &p.b_o, &p.b_c}) {
    *t = Tensor::zeros({hid}, true);
  }
  return p;
}

ParameterList LSTMCellParams::parameters(const std::string& prefix) const {
  return {{prefix + ".W_xi", W_xi}, {prefix + ".W_hi", W_hi}, {prefix + ".w_ci", w_ci},
          {prefix + ".b_i", b_i},   {prefix + ".W_xf", W_xf}, {prefix + ".W_hf", W_hf},
          {prefix + ".w_cf", w_cf}, {prefix + ".b_f", b_f},   {prefix + ".W_xo", W_xo},
          {prefix + ".W_ho", W_ho}, {prefix + ".w_co", w_co}, {prefix + ".b_o", b_o},
          {prefix + ".W_xc", W_xc}, {prefix + ".W_hc", W_hc}, {prefix + ".b_c", b_c}};
}

LSTMState LSTMState::zeros(std::size_t batch, std::size_t hidden) {
  return {Tensor::zeros({batch, hidden}), Tensor::zeros({batch, hidden})};
}

LSTMState lstm_cell_step(const Tensor& x_t, const LSTMState& state, const LSTMCellParams& p) {
  if (x_t.ndim() != 2 || x_t.dim(1) != p.input_size) {
    throw ShapeError(kModule, "lstm input " + shape_str(x_t.shape()) + " vs input_size " +
                                  std::to_string(p.input_size));
  }
  const Shape state_shape{x_t.dim(0), p.hidden_size};
  if (state.c.shape() != state_shape || state.h.shape() != state_shape) {
    throw ShapeError(kModule, "lstm state must be " + shape_str(state_shape));
  }
  const Tensor& c_prev = state.c;
  const Tensor& h_prev = state.h;
  const Tensor i_t =
      sigmoid(add(gate_preactivation(x_t, h_prev, p.W_xi, p.W_hi, p.b_i), scale_columns(c_prev, p.w_ci)));
  const Tensor f_t =
      sigmoid(add(gate_preactivation(x_t, h_prev, p.W_xf, p.W_hf, p.b_f), scale_columns(c_prev, p.w_cf)));
  const Tensor candidate = tanh(gate_preactivation(x_t, h_prev, p.W_xc, p.W_hc, p.b_c));
  const Tensor c_t = add(mul(f_t, c_prev), mul(i_t, candidate));
  const Tensor o_t =
      sigmoid(add(gate_preactivation(x_t, h_prev, p.W_xo, p.W_ho, p.b_o), scale_columns(c_t, p.w_co)));
  return {c_t, mul(o_t, tanh(c_t))};
}

DecoderConfig set_p(DecoderConfig config, real p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError(kModule, "p = " + std::to_string(p) + " outside [0, 1]");
  }
  config.p = p;
  return config;
}

SemanticDecoder SemanticDecoder::build(const DecoderConfig& config, std::size_t map_size,
                                       Rng& rng) {
  if (config.layers == 0 || config.hidden == 0 || config.input_size == 0 || map_size == 0) {
    throw ConfigError(kModule, "decoder sizes must be positive");
  }
  if (config.sequence_length == 0) throw ConfigError(kModule, "sequence_length must be positive");
  SemanticDecoder dec;
  dec.config_ = semcom::set_p(config, config.p);
  dec.set_dropout(config.dropout);
  dec.map_size_ = map_size;
  const real proj_bound = 1.0 / std::sqrt(static_cast<real>(map_size));
  dec.proj_w_ = init_uniform({map_size, config.input_size}, proj_bound, rng);
  dec.proj_b_ = Tensor::zeros({config.input_size}, true);
  std::size_t in = config.input_size;
  for (std::size_t l = 0; l < config.layers; ++l) {
    dec.layers_.push_back(LSTMCellParams::init(in, config.hidden, rng));
    in = config.hidden;
  }
  const real head_bound = 1.0 / std::sqrt(static_cast<real>(config.hidden));
  dec.head_w_ = init_uniform({config.hidden, 1}, head_bound, rng);
  dec.head_b_ = Tensor::zeros({1}, true);
  return dec;
}

void SemanticDecoder::set_p(real p) { config_ = semcom::set_p(config_, p); }

void SemanticDecoder::set_dropout(real rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw DomainError(kModule, "dropout rate " + std::to_string(rate) + " outside [0, 1)");
  }
  config_.dropout = rate;
}

Tensor SemanticDecoder::flatten(const Tensor& maps) const {
  if (maps.ndim() < 2 || maps.dim(0) == 0 || maps.numel() != maps.dim(0) * map_size_) {
    throw ShapeError(kModule, "expected a sequence of maps with " + std::to_string(map_size_) +
                                  " pixels each, got " + shape_str(maps.shape()));
  }
  return maps.ndim() == 2 ? maps : reshape(maps, {maps.dim(0), map_size_});
}

Tensor SemanticDecoder::head_outputs(const Tensor& maps, bool training, Rng& rng) const {
  const Tensor flat = flatten(maps);
  const std::size_t steps = flat.dim(0);
  const Tensor inputs = fully_connected(flat, proj_w_, proj_b_);

  std::vector<LSTMState> states(layers_.size(), LSTMState::zeros(1, config_.hidden));
  std::vector<Tensor> heads;
  heads.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor x = row(inputs, t);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      states[l] = lstm_cell_step(x, states[l], layers_[l]);
      x = states[l].h;
      if (l + 1 < layers_.size()) x = dropout(x, config_.dropout, training, rng);
    }
    heads.push_back(fully_connected(x, head_w_, head_b_));
  }
  return reshape(concat_rows(heads), {steps});
}

Tensor SemanticDecoder::decode_counts(const Tensor& maps, bool training, Rng& rng) const {
  const Tensor flat = flatten(maps);
  const Tensor head = head_outputs(flat, training, rng);
  return add(head, scale(row_sum(flat), config_.p));
}

ParameterList SemanticDecoder::parameters() const {
  ParameterList out{{"decoder.proj.w", proj_w_}, {"decoder.proj.b", proj_b_}};
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto layer = layers_[l].parameters("decoder.lstm" + std::to_string(l));
    out.insert(out.end(), layer.begin(), layer.end());
  }
  out.push_back({"decoder.head.w", head_w_});
  out.push_back({"decoder.head.b", head_b_});
  return out;
}

}  // namespace semcom
