#pragma once

#include <vector>

#include "semcom/ops.hpp"
#include "semcom/parameters.hpp"

namespace semcom {

/// Weights of one peephole LSTM layer in the row-vector convention
/// gate = x W_x + h W_h + c (.) w_c + b. Peephole weights are diagonal and
/// stored as vectors of length hidden_size.
struct LSTMCellParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor W_xi, W_hi, w_ci, b_i;
  Tensor W_xf, W_hf, w_cf, b_f;
  Tensor W_xo, W_ho, w_co, b_o;
  Tensor W_xc, W_hc, b_c;

  static LSTMCellParams init(std::size_t input_size, std::size_t hidden_size, Rng& rng);
  static LSTMCellParams zeros(std::size_t input_size, std::size_t hidden_size);
  ParameterList parameters(const std::string& prefix) const;
};

struct LSTMState {
  Tensor c;  // [B, hidden]
  Tensor h;  // [B, hidden]

  static LSTMState zeros(std::size_t batch, std::size_t hidden);
};

/// One time step:
///   i = sig(x W_xi + h W_hi + c w_ci + b_i)
///   f = sig(x W_xf + h W_hf + c w_cf + b_f)
///   c' = f c + i tanh(x W_xc + h W_hc + b_c)
///   o = sig(x W_xo + h W_ho + c' w_co + b_o)
///   h' = o tanh(c')
LSTMState lstm_cell_step(const Tensor& x_t, const LSTMState& state, const LSTMCellParams& params);

struct DecoderConfig {
  std::size_t layers = 3;
  std::size_t hidden = 100;
  /// Width of the learned projection of the flattened map fed to layer 0.
  std::size_t input_size = 100;
  /// Weight of the residual base count sum_m Z(m), in [0, 1].
  real p = 0.8;
  std::size_t sequence_length = 4;
  /// Dropout between stacked LSTM layers (training only).
  real dropout = 0.1;
};

/// Returns `config` with p replaced; throws DomainError unless 0 <= p <= 1.
DecoderConfig set_p(DecoderConfig config, real p);

/// Stacked LSTM over received maps plus FC head and partial residual:
///   n_hat_t = F(h_t^{last}) + p * sum_m Z_t(m)
class SemanticDecoder {
 public:
  static SemanticDecoder build(const DecoderConfig& config, std::size_t map_size, Rng& rng);

  /// Z: one sequence of T maps, [T, 1, H, W] or [T, M]; state starts at zero.
  /// Returns the T predicted counts as a [T] tensor.
  Tensor decode_counts(const Tensor& maps, bool training, Rng& rng) const;

  /// FC head output alone (the p = 0 prediction), [T].
  Tensor head_outputs(const Tensor& maps, bool training, Rng& rng) const;

  const DecoderConfig& config() const { return config_; }
  void set_p(real p);
  void set_dropout(real rate);

  std::size_t map_size() const { return map_size_; }
  const Tensor& projection_weight() const { return proj_w_; }
  const Tensor& projection_bias() const { return proj_b_; }
  const std::vector<LSTMCellParams>& layers() const { return layers_; }
  const Tensor& head_weight() const { return head_w_; }
  const Tensor& head_bias() const { return head_b_; }

  ParameterList parameters() const;

 private:
  Tensor flatten(const Tensor& maps) const;

  DecoderConfig config_;
  std::size_t map_size_ = 0;
  Tensor proj_w_, proj_b_;
  std::vector<LSTMCellParams> layers_;
  Tensor head_w_, head_b_;
};

}  // namespace semcom
