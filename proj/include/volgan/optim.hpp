#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "volgan/common.hpp"
#include "volgan/tensor.hpp"

namespace volgan {

// Adam with bias correction. Moments are allocated lazily to match the
// parameter list handed to the first step; the list must keep the same
// shapes for the lifetime of the state.
template <typename S>
struct AdamStateT {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  std::vector<std::vector<S>> first_moment;
  std::vector<std::vector<S>> second_moment;
};

using AdamState = AdamStateT<float>;

template <typename S>
void zero_grads(std::span<TensorT<S>> params) {
  for (auto& p : params) p.zero_grad();
}

template <typename S>
void adam_step(std::span<TensorT<S>> params, AdamStateT<S>& state) {
  if (state.first_moment.empty()) {
    state.first_moment.resize(params.size());
    state.second_moment.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.first_moment[i].assign(params[i].size(), S(0));
      state.second_moment[i].assign(params[i].size(), S(0));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: parameter count changed, state has " +
                        std::to_string(state.first_moment.size()) +
                        " entries for " + std::to_string(params.size()) +
                        " parameters");
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != params[i].size()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) +
                          " length mismatch with optimizer state");
    }
    auto values = params[i].data();
    auto grads = params[i].grad();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = double(grads[j]);
      m[j] = S(state.beta1 * double(m[j]) + (1.0 - state.beta1) * g);
      v[j] = S(state.beta2 * double(v[j]) + (1.0 - state.beta2) * g * g);
      const double mhat = double(m[j]) / bc1;
      const double vhat = double(v[j]) / bc2;
      values[j] = S(double(values[j]) -
                    state.learning_rate * mhat /
                        (std::sqrt(vhat) + state.epsilon));
    }
  }
}

}  // namespace volgan
