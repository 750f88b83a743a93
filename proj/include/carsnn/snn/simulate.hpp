#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/preprocess/frames.hpp"
#include "carsnn/snn/kernels.hpp"
#include "carsnn/snn/network.hpp"

namespace carsnn {

// ---------------------------------------------------------------------------
// Decision rules, shared by the float model and the chip emulator.

/// Output neuron with the most spikes; ties go to the higher final membrane
/// potential, then to the lower class index.
template <class Count, class Potential>
int argmax_with_ties(std::span<const Count> counts, std::span<const Potential> final_potential) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(counts.size()); ++c) {
    if (counts[c] > counts[best] || (counts[c] == counts[best] && final_potential[c] > final_potential[best])) best = c;
  }
  return best;
}

/// Majority vote over per-frame predictions. A tie goes to the last frame's
/// prediction when it is among the leaders, otherwise to the lowest tied
/// class.
inline int predict_stream(std::span<const int> per_frame, int num_classes = 2) {
  if (per_frame.empty()) fail(ErrorCode::EmptyInput, "no frame predictions to vote on");
  std::vector<std::size_t> votes(static_cast<std::size_t>(num_classes), 0);
  for (int p : per_frame) ++votes.at(static_cast<std::size_t>(p));
  const std::size_t top = *std::max_element(votes.begin(), votes.end());
  if (votes[static_cast<std::size_t>(per_frame.back())] == top) return per_frame.back();
  return static_cast<int>(std::find(votes.begin(), votes.end(), top) - votes.begin());
}

// ---------------------------------------------------------------------------

/// Steps a network one timestep at a time, keeping u (potential), o (output)
/// and x (synaptic input) for every layer. Linear pooling layers have no
/// state: their u and o both equal x.
class Simulator {
 public:
  explicit Simulator(const NetworkSpec& net) : net_(&net) {
    validate(net);
    for (const auto& l : net.layers) {
      kernels_.emplace_back(l.geometry, std::span<const double>(l.weights), l.pool_weight());
      u_.emplace_back(l.neurons(), 0.0);
      o_.emplace_back(l.neurons(), 0.0);
      x_.emplace_back(l.neurons(), 0.0);
    }
  }

  const NetworkSpec& network() const { return *net_; }
  std::size_t layer_count() const { return kernels_.size(); }
  const LayerKernel<double>& kernel(std::size_t n) const { return kernels_[n]; }

  void reset() {
    for (std::size_t n = 0; n < u_.size(); ++n) {
      std::fill(u_[n].begin(), u_[n].end(), 0.0);
      std::fill(o_[n].begin(), o_[n].end(), 0.0);
      std::fill(x_[n].begin(), x_[n].end(), 0.0);
    }
  }

  void step(std::span<const std::uint8_t> input) {
    if (input.size() != net_->input.size())
      fail(ErrorCode::ShapeMismatch, "input has " + std::to_string(input.size()) + " values, network expects " +
                                         std::to_string(net_->input.size()));
    const LifParams& p = net_->lif;
    for (std::size_t n = 0; n < kernels_.size(); ++n) {
      if (n == 0)
        kernels_[0].forward<double, std::uint8_t>(input, x_[0]);
      else
        kernels_[n].forward<double, double>(o_[n - 1], x_[n]);
      auto& u = u_[n];
      auto& o = o_[n];
      const auto& x = x_[n];
      if (!net_->is_spiking(n)) {
        u = x;
        o = x;
        continue;
      }
      const auto& bias = net_->layers[n].bias;
      const std::size_t per_channel = bias.empty() ? 0 : u.size() / bias.size();
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double b = bias.empty() ? 0.0 : bias[i / per_channel];
        const LifOutput r = lif_step(u[i], o[i] != 0.0, x[i], b, p);
        u[i] = r.u;
        o[i] = r.spike ? 1.0 : 0.0;
      }
    }
  }

  std::span<const double> potentials(std::size_t n) const { return u_[n]; }
  std::span<const double> outputs(std::size_t n) const { return o_[n]; }
  std::span<const double> synaptic_inputs(std::size_t n) const { return x_[n]; }

 private:
  const NetworkSpec* net_;
  std::vector<LayerKernel<double>> kernels_;
  std::vector<std::vector<double>> u_, o_, x_;
};

/// Per-layer, per-timestep trace, indexed [t * neurons + i].
struct LayerTrace {
  std::size_t neurons = 0;
  std::vector<double> u, o, x;

  std::span<const double> u_at(std::size_t t) const { return {u.data() + t * neurons, neurons}; }
  std::span<const double> o_at(std::size_t t) const { return {o.data() + t * neurons, neurons}; }
  std::span<const double> x_at(std::size_t t) const { return {x.data() + t * neurons, neurons}; }
};

/// Everything the backward pass needs. Timesteps are grouped into
/// segments of `segment_length` (one per frame); state is reset at segment
/// boundaries unless `carry_state` is set.
struct StateRecord {
  std::uint32_t timesteps = 0;
  std::uint32_t segment_length = 0;
  bool carry_state = false;
  std::size_t input_size = 0;
  std::vector<std::uint8_t> inputs;  // [t * input_size + i]
  std::vector<LayerTrace> layers;

  std::uint32_t segments() const { return segment_length ? timesteps / segment_length : 0; }
  std::span<const std::uint8_t> input_at(std::size_t t) const { return {inputs.data() + t * input_size, input_size}; }
  const LayerTrace& output() const { return layers.back(); }
};

inline void check_frame(const NetworkSpec& net, const SpikeFrame& f) {
  if (net.input.channels != SpikeFrame::kChannels || f.height != net.input.height || f.width != net.input.width)
    fail(ErrorCode::ShapeMismatch, "frame " + std::to_string(f.height) + "x" + std::to_string(f.width) +
                                       " does not match network input " + to_string(net.input));
}

/// Holds each frame at the input for `frame_repeat` timesteps and records
/// the whole run.
inline StateRecord forward(const NetworkSpec& net, std::span<const SpikeFrame> frames, std::uint32_t frame_repeat,
                           bool carry_state = false) {
  if (frame_repeat == 0) fail(ErrorCode::InvalidConfig, "frame_repeat must be >= 1");
  for (const auto& f : frames) check_frame(net, f);
  Simulator sim(net);
  StateRecord rec;
  rec.segment_length = frame_repeat;
  rec.timesteps = static_cast<std::uint32_t>(frames.size()) * frame_repeat;
  rec.carry_state = carry_state;
  rec.input_size = net.input.size();
  rec.inputs.reserve(rec.timesteps * rec.input_size);
  for (const auto& l : net.layers) {
    LayerTrace tr;
    tr.neurons = l.neurons();
    tr.u.reserve(tr.neurons * rec.timesteps);
    tr.o.reserve(tr.neurons * rec.timesteps);
    tr.x.reserve(tr.neurons * rec.timesteps);
    rec.layers.push_back(std::move(tr));
  }
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (!carry_state) sim.reset();
    for (std::uint32_t r = 0; r < frame_repeat; ++r) {
      sim.step(frames[f].bits);
      rec.inputs.insert(rec.inputs.end(), frames[f].bits.begin(), frames[f].bits.end());
      for (std::size_t n = 0; n < rec.layers.size(); ++n) {
        auto& tr = rec.layers[n];
        const auto u = sim.potentials(n), o = sim.outputs(n), x = sim.synaptic_inputs(n);
        tr.u.insert(tr.u.end(), u.begin(), u.end());
        tr.o.insert(tr.o.end(), o.begin(), o.end());
        tr.x.insert(tr.x.end(), x.begin(), x.end());
      }
    }
  }
  return rec;
}

inline StateRecord forward(const NetworkSpec& net, const SpikeFrame& frame, std::uint32_t frame_repeat) {
  return forward(net, std::span<const SpikeFrame>(&frame, 1), frame_repeat);
}

/// Output spike counts of one segment.
inline std::vector<std::uint32_t> output_counts(const StateRecord& rec, std::uint32_t segment) {
  const auto& out = rec.output();
  std::vector<std::uint32_t> counts(out.neurons, 0);
  for (std::uint32_t t = segment * rec.segment_length; t < (segment + 1) * rec.segment_length; ++t) {
    const auto o = out.o_at(t);
    for (std::size_t i = 0; i < out.neurons; ++i) counts[i] += o[i] != 0.0 ? 1u : 0u;
  }
  return counts;
}

inline int predict_frame(const StateRecord& rec, std::uint32_t segment = 0) {
  if (rec.timesteps == 0 || segment >= rec.segments()) fail(ErrorCode::MissingRecord, "record has no such segment");
  const auto counts = output_counts(rec, segment);
  const auto final_u = rec.output().u_at((segment + 1) * rec.segment_length - 1);
  return argmax_with_ties<std::uint32_t, double>(counts, final_u);
}

/// Runs one frame from a reset state without recording and classifies it.
inline int classify_frame(Simulator& sim, const SpikeFrame& frame, std::uint32_t frame_repeat) {
  check_frame(sim.network(), frame);
  sim.reset();
  const std::size_t out = sim.layer_count() - 1;
  std::vector<std::uint32_t> counts(sim.outputs(out).size(), 0);
  for (std::uint32_t r = 0; r < frame_repeat; ++r) {
    sim.step(frame.bits);
    const auto o = sim.outputs(out);
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o[i] != 0.0 ? 1u : 0u;
  }
  return argmax_with_ties<std::uint32_t, double>(counts, sim.potentials(out));
}

}  // namespace carsnn
