#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "semcom/decoder.hpp"

namespace semcom::test {

/// Scalar peephole cell written out with plain doubles.
struct ScalarCell {
  real w_xi, w_hi, w_ci, b_i;
  real w_xf, w_hf, w_cf, b_f;
  real w_xo, w_ho, w_co, b_o;
  real w_xc, w_hc, b_c;

  static real sig(real v) { return 1.0 / (1.0 + std::exp(-v)); }

  void step(real x, real& c, real& h) const {
    const real i = sig(x * w_xi + h * w_hi + c * w_ci + b_i);
    const real f = sig(x * w_xf + h * w_hf + c * w_cf + b_f);
    const real g = std::tanh(x * w_xc + h * w_hc + b_c);
    const real c_new = f * c + i * g;
    const real o = sig(x * w_xo + h * w_ho + c_new * w_co + b_o);
    c = c_new;
    h = o * std::tanh(c_new);
  }

  LSTMCellParams params() const {
    auto s = [](real v) { return Tensor::from_data({1}, {v}, true); };
    auto m = [](real v) { return Tensor::from_data({1, 1}, {v}, true); };
    LSTMCellParams p;
    p.input_size = p.hidden_size = 1;
    p.W_xi = m(w_xi), p.W_hi = m(w_hi), p.w_ci = s(w_ci), p.b_i = s(b_i);
    p.W_xf = m(w_xf), p.W_hf = m(w_hf), p.w_cf = s(w_cf), p.b_f = s(b_f);
    p.W_xo = m(w_xo), p.W_ho = m(w_ho), p.w_co = s(w_co), p.b_o = s(b_o);
    p.W_xc = m(w_xc), p.W_hc = m(w_hc), p.b_c = s(b_c);
    return p;
  }

  static ScalarCell random(Rng& rng) {
    ScalarCell c{};
    for (real* v : {&c.w_xi, &c.w_hi, &c.w_ci, &c.b_i, &c.w_xf, &c.w_hf, &c.w_cf, &c.b_f,
                    &c.w_xo, &c.w_ho, &c.w_co, &c.b_o, &c.w_xc, &c.w_hc, &c.b_c}) {
      *v = std::uniform_real_distribution<real>(-2.0, 2.0)(rng);
    }
    return c;
  }
};

/// Step-by-step decode built from lstm_cell_step and fully_connected, in
/// evaluation mode.
inline std::vector<real> composed_decode(const SemanticDecoder& dec, const Tensor& flat) {
  const Tensor inputs = fully_connected(flat, dec.projection_weight(), dec.projection_bias());
  std::vector<LSTMState> states(dec.layers().size(),
                                LSTMState::zeros(1, dec.config().hidden));
  std::vector<real> out;
  for (std::size_t t = 0; t < flat.dim(0); ++t) {
    Tensor x = row(inputs, t);
    for (std::size_t l = 0; l < states.size(); ++l) {
      states[l] = lstm_cell_step(x, states[l], dec.layers()[l]);
      x = states[l].h;
    }
    real base = 0;
    for (std::size_t m = 0; m < flat.dim(1); ++m) base += flat.at(t * flat.dim(1) + m);
    out.push_back(fully_connected(x, dec.head_weight(), dec.head_bias()).item() +
                  dec.config().p * base);
  }
  return out;
}

}  // namespace semcom::test
