#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/snn/network.hpp"
#include "carsnn/stbp/backward.hpp"

namespace carsnn {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  // First and second moments, shaped like each layer's weights then biases.
  std::vector<std::vector<double>> m_weights, v_weights, m_bias, v_bias;

  static AdamState for_network(const NetworkSpec& net) {
    AdamState s;
    for (const auto& l : net.layers) {
      s.m_weights.emplace_back(l.weights.size(), 0.0);
      s.v_weights.emplace_back(l.weights.size(), 0.0);
      s.m_bias.emplace_back(l.bias.size(), 0.0);
      s.v_bias.emplace_back(l.bias.size(), 0.0);
    }
    return s;
  }

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One Adam update of every learnable weight. Biases are never updated:
/// they stay at their current value (zero for trained networks) so the
/// model maps onto hardware without a bias term.
inline void adam_step(NetworkSpec& net, const GradientSet& grads, AdamState& state, double lr) {
  if (grads.weights.size() != net.layers.size() || state.m_weights.size() != net.layers.size())
    fail(ErrorCode::ShapeMismatch, "gradient/optimizer state does not match the network");
  for (std::size_t n = 0; n < net.layers.size(); ++n)
    if (grads.weights[n].size() != net.layers[n].weights.size() ||
        state.m_weights[n].size() != net.layers[n].weights.size())
      fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(n) + " gradient shape mismatch");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t n = 0; n < net.layers.size(); ++n) {
    auto& w = net.layers[n].weights;
    const auto& g = grads.weights[n];
    auto& m = state.m_weights[n];
    auto& v = state.v_weights[n];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

struct LrSchedule {
  double lr_initial = 1e-3;
  std::uint32_t halving_period_epochs = 20;
};

/// Step decay: the rate halves every `halving_period_epochs` epochs.
inline double lr_schedule(std::uint32_t epoch, const LrSchedule& s) {
  if (s.halving_period_epochs == 0) return s.lr_initial;
  return s.lr_initial * std::pow(0.5, static_cast<double>(epoch / s.halving_period_epochs));
}

}  // namespace carsnn
