#pragma once

#include <cmath>

#include "carsnn/core/error.hpp"

namespace carsnn {

/// Shared parameters of every LIF neuron in a network.
struct LifParams {
  double v_th = 0.4;   // firing threshold
  double tau = 0.2;    // per-timestep membrane decay factor
  double a1 = 0.8;     // surrogate window width (a1/2 = v_th by default)
  double reset_value = 0.0;

  friend bool operator==(const LifParams&, const LifParams&) = default;
};

inline void validate(const LifParams& p) {
  if (!(p.tau > 0.0 && p.tau < 1.0)) fail(ErrorCode::InvalidConfig, "tau must be in (0, 1)");
  if (!(p.v_th > 0.0)) fail(ErrorCode::InvalidConfig, "v_th must be > 0");
  if (!(p.a1 > 0.0)) fail(ErrorCode::InvalidConfig, "a1 must be > 0");
  if (p.reset_value != 0.0) fail(ErrorCode::InvalidConfig, "only reset-to-zero is supported");
}

struct LifOutput {
  double u = 0.0;
  bool spike = false;
};

/// One membrane update: the previous potential decays by tau unless the
/// neuron fired last step (multiplicative reset), then the input and bias
/// are added. Fires when the new potential reaches the threshold.
inline LifOutput lif_step(double u_prev, bool o_prev, double x_in, double bias, const LifParams& p) {
  const double u = u_prev * p.tau * (o_prev ? 0.0 : 1.0) + x_in + bias;
  return {u, u >= p.v_th};
}

/// Rectangular surrogate for the derivative of the spike function:
/// 1/a1 inside the open window |u - v_th| < a1/2, zero elsewhere.
inline double surrogate_grad(double u, const LifParams& p) {
  return std::abs(u - p.v_th) < p.a1 / 2.0 ? 1.0 / p.a1 : 0.0;
}

}  // namespace carsnn
