#pragma once

// Layer-by-layer comparison of the integer emulator against the float model
// running on dequantized weights.
//
// Each float layer is driven by the integer model's spikes from the layer
// below (teacher forcing), so a disagreement cannot cascade. For every
// neuron a bound B on |u_float - V_int| is carried along, where V_int is the
// integer voltage divided by scale * 2^6:
//
//   after a spike      B' = eta
//   otherwise          B' = max(tau, d) * B + |tau - d| * |u_float| + 1 / (64 * scale) + eta
//
// d is the decay factor the translation of tau should produce (not the one
// stored in the quantized network, so a wrong decay shows up as a
// violation). The second term covers tau != d, the third the rounded
// decay multiply, and eta absorbs float rounding. Spikes can
// legitimately differ only when the float potential lies within B of the
// threshold (the boundary set); there the float state is re-synchronised to
// the integer one. A spike mismatch outside the boundary set, or an error
// larger than B, means the two models are not equivalent.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/loihi/cuba.hpp"
#include "carsnn/loihi/emulate.hpp"
#include "carsnn/loihi/quantize.hpp"
#include "carsnn/snn/kernels.hpp"
#include "carsnn/snn/network.hpp"

namespace carsnn {

struct LayerEquivalence {
  std::uint64_t neuron_steps = 0;
  std::uint64_t spikes_int = 0;
  std::uint64_t spikes_float = 0;
  std::uint64_t boundary = 0;                     // neuron-steps in the boundary set
  std::uint64_t mismatches = 0;                   // all spike disagreements
  std::uint64_t mismatches_outside_boundary = 0;  // must be 0
  std::uint64_t bound_violations = 0;             // |u_float - V_int| > B, must be 0
  double max_bound = 0.0;
  double max_error = 0.0;
};

struct EquivalenceReport {
  std::vector<LayerEquivalence> layers;
  std::uint64_t frames = 0;
  std::uint64_t timesteps = 0;
  std::uint64_t neuron_steps = 0;
  std::uint64_t boundary = 0;
  std::uint64_t mismatches_outside_boundary = 0;
  std::uint64_t bound_violations = 0;
  /// Fraction of neuron-steps outside the boundary set whose spikes agree.
  double agreement_outside_boundary = 1.0;
  bool equivalent = true;
  /// Float model running on its own spikes (no teacher forcing).
  double free_running_spike_agreement = 1.0;
  double free_running_prediction_agreement = 1.0;
  /// Numerical slack eta used in the bound.
  double eta = 0.0;
};

struct EquivalenceOptions {
  EmulationConfig protocol;
  double eta = 1e-9;
};

namespace detail {

inline void check_compatible(const NetworkSpec& net, const QuantizedNetwork& q) {
  validate(net);
  if (net.layers.size() != q.layers.size() || !(net.input == q.input))
    fail(ErrorCode::ShapeMismatch, "float and quantized networks have different structure");
  for (std::size_t n = 0; n < net.layers.size(); ++n)
    if (!(net.layers[n].geometry == q.layers[n].geometry))
      fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(n) + " geometry differs");
  if (net.pooling != PoolingMode::Spiking) fail(ErrorCode::InvalidConfig, "equivalence needs spiking pooling");
}

inline std::vector<LayerKernel<double>> dequantized_kernels(const QuantizedNetwork& q) {
  const NetworkSpec deq = dequantize(q);
  std::vector<LayerKernel<double>> k;
  for (std::size_t n = 0; n < q.layers.size(); ++n)
    k.emplace_back(q.layers[n].geometry, std::span<const double>(deq.layers[n].weights),
                   dequantized_pool_weight(q, n));
  return k;
}

}  // namespace detail

inline EquivalenceReport equivalence_check(const NetworkSpec& net, const QuantizedNetwork& q,
                                           std::span<const SpikeFrame> frames, const EquivalenceOptions& opt = {}) {
  detail::check_compatible(net, q);
  validate(opt.protocol);
  const std::size_t L = q.layers.size();
  const auto kernels = detail::dequantized_kernels(q);
  const double tau = net.lif.tau;
  const double theta_f = net.lif.v_th;
  const double unit = 64.0 * q.scale;  // integer voltage per unit of float potential
  const double theta_i = static_cast<double>(q.threshold()) / unit;
  const double d_expected = static_cast<double>(kDecayOne - delta_v_for(tau)) / kDecayOne;
  const double decay_max = std::max(tau, d_expected);
  const double lo_theta = std::min(theta_f, theta_i), hi_theta = std::max(theta_f, theta_i);

  EquivalenceReport rep;
  rep.eta = opt.eta;
  rep.layers.resize(L);
  CubaNetwork chip(q);

  // Lock-step float state.
  std::vector<std::vector<double>> u(L), bound(L), x(L);
  std::vector<std::vector<std::uint8_t>> o_prev(L);
  // Free-running float state.
  std::vector<std::vector<double>> fu(L), fx(L);
  std::vector<std::vector<std::uint8_t>> fo(L);
  for (std::size_t n = 0; n < L; ++n) {
    const std::size_t k = q.layers[n].neurons();
    u[n].assign(k, 0.0);
    bound[n].assign(k, 0.0);
    x[n].assign(k, 0.0);
    o_prev[n].assign(k, 0);
    fu[n].assign(k, 0.0);
    fx[n].assign(k, 0.0);
    fo[n].assign(k, 0);
  }
  std::uint64_t free_agree = 0, free_total = 0, pred_agree = 0;
  const std::vector<std::uint8_t> zeros(q.input.size(), 0);

  for (const auto& f : frames) {
    if (f.height != q.input.height || f.width != q.input.width)
      fail(ErrorCode::ShapeMismatch, "frame does not match network input " + to_string(q.input));
    std::array<std::uint32_t, 2> int_counts{0, 0}, float_counts{0, 0};
    for (std::uint32_t t = 0; t < opt.protocol.timesteps_per_inference(); ++t) {
      const std::span<const std::uint8_t> input =
          t < opt.protocol.replication ? std::span<const std::uint8_t>(f.bits) : std::span<const std::uint8_t>(zeros);
      chip.step(input);
      ++rep.timesteps;
      for (std::size_t n = 0; n < L; ++n) {
        auto& st = rep.layers[n];
        const std::span<const std::uint8_t> below = n == 0 ? input : chip.spikes(n - 1);
        kernels[n].forward<double, std::uint8_t>(below, x[n]);
        const auto s_int = chip.spikes(n);
        const auto& cv = chip.state(n).comp_v;
        for (std::size_t i = 0; i < x[n].size(); ++i) {
          double b;
          double uf;
          if (o_prev[n][i]) {
            b = opt.eta;
            uf = x[n][i];
          } else {
            b = decay_max * bound[n][i] + std::abs(tau - d_expected) * std::abs(u[n][i]) + 1.0 / unit + opt.eta;
            uf = u[n][i] * tau + x[n][i];
          }
          const bool fire_f = uf >= theta_f;
          const bool fire_i = s_int[i] != 0;
          // After a spike the chip stores 0, so the voltage is only
          // comparable on silent steps.
          const double v_int = fire_i ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(cv[i]) / unit;
          const bool in_boundary = uf >= lo_theta - b && uf < hi_theta + b;
          ++st.neuron_steps;
          st.spikes_int += fire_i;
          st.spikes_float += fire_f;
          st.max_bound = std::max(st.max_bound, b);
          if (in_boundary) ++st.boundary;
          if (fire_f != fire_i) {
            ++st.mismatches;
            if (!in_boundary) ++st.mismatches_outside_boundary;
          }
          if (!fire_i) {
            const double err = std::abs(uf - v_int);
            st.max_error = std::max(st.max_error, err);
            if (err > b) ++st.bound_violations;
          }
          // Anything uncertain is resynced to the integer state.
          if (in_boundary || fire_f != fire_i || (!fire_i && std::abs(uf - v_int) > b)) {
            u[n][i] = fire_i ? 0.0 : v_int;
            bound[n][i] = opt.eta;
          } else {
            u[n][i] = uf;
            bound[n][i] = b;
          }
          o_prev[n][i] = fire_i ? 1 : 0;
        }
      }
      // Free-running float model.
      for (std::size_t n = 0; n < L; ++n) {
        if (n == 0)
          kernels[0].forward<double, std::uint8_t>(input, fx[0]);
        else
          kernels[n].forward<double, std::uint8_t>(fo[n - 1], fx[n]);
        const auto s_int = chip.spikes(n);
        for (std::size_t i = 0; i < fx[n].size(); ++i) {
          const LifOutput r = lif_step(fu[n][i], fo[n][i] != 0, fx[n][i], 0.0, net.lif);
          fu[n][i] = r.u;
          fo[n][i] = r.spike ? 1 : 0;
          free_agree += fo[n][i] == s_int[i];
          ++free_total;
        }
      }
      int_counts[0] += chip.spikes(L - 1)[0];
      int_counts[1] += chip.spikes(L - 1)[1];
      float_counts[0] += fo[L - 1][0];
      float_counts[1] += fo[L - 1][1];
    }
    const int p_int = argmax_with_ties<std::uint32_t, std::int64_t>(int_counts, chip.state(L - 1).comp_v);
    const int p_float = argmax_with_ties<std::uint32_t, double>(float_counts, fu[L - 1]);
    pred_agree += p_int == p_float;
    ++rep.frames;
  }

  std::uint64_t outside = 0, outside_agree = 0;
  for (const auto& st : rep.layers) {
    rep.neuron_steps += st.neuron_steps;
    rep.boundary += st.boundary;
    rep.mismatches_outside_boundary += st.mismatches_outside_boundary;
    rep.bound_violations += st.bound_violations;
    outside += st.neuron_steps - st.boundary;
    outside_agree += st.neuron_steps - st.boundary - st.mismatches_outside_boundary;
  }
  rep.agreement_outside_boundary = outside ? static_cast<double>(outside_agree) / static_cast<double>(outside) : 1.0;
  rep.equivalent = rep.mismatches_outside_boundary == 0 && rep.bound_violations == 0;
  rep.free_running_spike_agreement = free_total ? static_cast<double>(free_agree) / static_cast<double>(free_total) : 1.0;
  rep.free_running_prediction_agreement = rep.frames ? static_cast<double>(pred_agree) / static_cast<double>(rep.frames) : 1.0;
  return rep;
}

}  // namespace carsnn
