#include "semcom/adam.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

namespace {
const char* kModule = "tensor-core";
}

AdamState make_adam_state(const std::vector<Tensor>& params, real beta1, real beta2,
                          real epsilon) {
  AdamState state;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.epsilon = epsilon;
  for (const auto& p : params) {
    state.first_moment.push_back(Tensor::zeros(p.shape()));
    state.second_moment.push_back(Tensor::zeros(p.shape()));
  }
  return state;
}

namespace {

// `grad_of(i)` yields the gradient span of parameter i (empty = zero gradient).
template <typename GradOf>
void step_impl(std::vector<Tensor>& params, GradOf grad_of, AdamState& state, real lr) {
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state = make_adam_state(params, state.beta1, state.beta2, state.epsilon);
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError(kModule, "adam_step: optimizer state holds " +
                                  std::to_string(state.first_moment.size()) + " moments for " +
                                  std::to_string(params.size()) + " params");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i].shape();
    const auto g = grad_of(i);
    if ((!g.empty() && g.size() != params[i].numel()) || state.first_moment[i].shape() != shape ||
        state.second_moment[i].shape() != shape) {
      throw ShapeError(kModule, "adam_step: parameter " + std::to_string(i) + " shape " +
                                    shape_str(shape) + " is not congruent with grad/moments");
    }
  }

  state.step_count += 1;
  const real t = static_cast<real>(state.step_count);
  const real correction1 = 1.0 - std::pow(state.beta1, t);
  const real correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_data();
    const auto g = grad_of(i);
    auto m = state.first_moment[i].mutable_data();
    auto v = state.second_moment[i].mutable_data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const real gj = g.empty() ? 0.0 : g[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const real m_hat = m[j] / correction1;
      const real v_hat = v[j] / correction2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               real lr) {
  if (grads.size() != params.size()) {
    throw ShapeError(kModule, "adam_step: " + std::to_string(grads.size()) + " grads for " +
                                  std::to_string(params.size()) + " params");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape()) {
      throw ShapeError(kModule, "adam_step: grad " + shape_str(grads[i].shape()) +
                                    " for parameter " + shape_str(params[i].shape()));
    }
  }
  step_impl(params, [&](std::size_t i) { return grads[i].data(); }, state, lr);
}

void adam_step(std::vector<Tensor>& params, AdamState& state, real lr) {
  step_impl(params, [&](std::size_t i) { return params[i].grad(); }, state, lr);
}

}  // namespace semcom
