#pragma once

// Integer current-based LIF, one compartment per neuron:
//
//   comp_i' = decay(comp_i, delta_i) + 2^(6 + wgtExp) * sum_j w_j s_j
//   comp_v' = decay(comp_v, delta_v) + comp_i' + bias
//   spike   = comp_v' >= vth_mant * 2^6, after which comp_v' is stored as 0
//
// with decay(x, d) = x * (4096 - d) / 4096 under the network's rounding
// mode. Only 64-bit integer operations are used.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/loihi/quantize.hpp"
#include "carsnn/snn/kernels.hpp"

namespace carsnn {

/// The single place where the 12-bit decay is rounded.
inline std::int64_t decay(std::int64_t value, std::int32_t delta, DecayRounding rounding) {
  const std::int64_t num = value * (kDecayOne - delta);
  if (rounding == DecayRounding::TowardZero) return num / kDecayOne;
  std::int64_t q = num / kDecayOne;
  if (num % kDecayOne != 0 && num < 0) --q;
  return q;
}

struct CubaState {
  std::vector<std::int64_t> comp_v;
  std::vector<std::int64_t> comp_i;

  explicit CubaState(std::size_t n = 0) : comp_v(n, 0), comp_i(n, 0) {}
  void reset() {
    std::fill(comp_v.begin(), comp_v.end(), 0);
    std::fill(comp_i.begin(), comp_i.end(), 0);
  }

  friend bool operator==(const CubaState&, const CubaState&) = default;
};

/// Synaptic routing of one quantized layer (integer weights, int64 sums).
inline LayerKernel<std::int64_t> make_int_kernel(const QuantizedLayer& l) {
  std::vector<std::int64_t> w(l.weights.begin(), l.weights.end());
  return LayerKernel<std::int64_t>(l.geometry, w, l.pool_weight);
}

/// Advances one layer by one timestep given its weighted input sum
/// (sum_j w_j s_j, before the 2^(6+wgtExp) factor).
inline void cuba_update(CubaState& state, const QuantizedNetwork& q, int wgt_exp,
                        std::span<const std::int64_t> weighted_sum, std::span<std::uint8_t> spikes) {
  const int shift = kVoltageShift + wgt_exp;
  if (shift < 0) fail(ErrorCode::InvalidConfig, "wgtExp below -6 is not supported");
  const std::int64_t theta = q.threshold();
  for (std::size_t i = 0; i < state.comp_v.size(); ++i) {
    const std::int64_t ci = decay(state.comp_i[i], q.delta_i, q.rounding) + weighted_sum[i] * (std::int64_t{1} << shift);
    const std::int64_t cv = decay(state.comp_v[i], q.delta_v, q.rounding) + ci + q.bias;
    state.comp_i[i] = ci;
    const bool fire = cv >= theta;
    spikes[i] = fire ? 1 : 0;
    state.comp_v[i] = fire ? 0 : cv;
  }
}

/// One timestep of layer `n` driven by the previous layer's spikes.
inline void cuba_step(CubaState& state, const QuantizedNetwork& q, std::size_t n,
                      const LayerKernel<std::int64_t>& kernel, std::span<const std::uint8_t> input_spikes,
                      std::span<std::uint8_t> output_spikes, std::vector<std::int64_t>& scratch) {
  const auto& l = q.layers[n];
  if (input_spikes.size() != l.geometry.in.size() || output_spikes.size() != l.neurons() ||
      state.comp_v.size() != l.neurons())
    fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(n) + " state or spike sizes do not match");
  scratch.resize(l.neurons());
  kernel.forward<std::int64_t, std::uint8_t>(input_spikes, scratch);
  cuba_update(state, q, l.wgt_exp, scratch, output_spikes);
}

/// Whole-network integer emulator with persistent state.
class CubaNetwork {
 public:
  explicit CubaNetwork(const QuantizedNetwork& q) : q_(&q) {
    if (q.layers.empty()) fail(ErrorCode::ShapeMismatch, "quantized network has no layers");
    for (const auto& l : q.layers) {
      kernels_.push_back(make_int_kernel(l));
      states_.emplace_back(l.neurons());
      spikes_.emplace_back(l.neurons(), 0);
      sums_.emplace_back(l.neurons(), 0);
    }
  }

  const QuantizedNetwork& network() const { return *q_; }
  std::size_t layer_count() const { return states_.size(); }

  void reset() {
    for (auto& s : states_) s.reset();
    for (auto& s : spikes_) std::fill(s.begin(), s.end(), 0);
  }

  void step(std::span<const std::uint8_t> input) {
    if (input.size() != q_->input.size()) fail(ErrorCode::ShapeMismatch, "input size does not match the network");
    for (std::size_t n = 0; n < states_.size(); ++n) {
      const std::span<const std::uint8_t> in = n == 0 ? input : std::span<const std::uint8_t>(spikes_[n - 1]);
      kernels_[n].forward<std::int64_t, std::uint8_t>(in, sums_[n]);
      cuba_update(states_[n], *q_, q_->layers[n].wgt_exp, sums_[n], spikes_[n]);
    }
  }

  const CubaState& state(std::size_t n) const { return states_[n]; }
  std::span<const std::uint8_t> spikes(std::size_t n) const { return spikes_[n]; }
  /// Weighted input sum of the last step, before the 2^(6+wgtExp) factor.
  std::span<const std::int64_t> weighted_sum(std::size_t n) const { return sums_[n]; }

 private:
  const QuantizedNetwork* q_;
  std::vector<LayerKernel<std::int64_t>> kernels_;
  std::vector<CubaState> states_;
  std::vector<std::vector<std::uint8_t>> spikes_;
  std::vector<std::vector<std::int64_t>> sums_;
};

}  // namespace carsnn
