#pragma once

// Partition of a quantized network onto neurocores.
//
// Every neuron of every layer is one compartment (the input sensor is
// external). Layers are placed from the output backwards so that, when a
// layer is cut into cores, the cores its axons reach are already known.
// Within a layer neurons are visited position-major with channels inner,
// which keeps the presynaptic footprint of a core compact for convolutions,
// and a core is closed as soon as the next neuron would break a limit.
//
// Per-core quantities:
//   compartments   neurons on the core
//   fan-in         distinct presynaptic neurons feeding the core
//   fan-out        sum over its neurons of distinct destination cores
//   memory         synapses on the core * bytes_per_synapse
// Synapses count every kernel tap, including those on zero padding.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/loihi/quantize.hpp"
#include "carsnn/snn/layer.hpp"

namespace carsnn {

struct ChipConstraints {
  std::uint64_t max_compartments_per_core = 1024;
  std::uint64_t max_fanin_per_core = 4096;
  std::uint64_t max_fanout_per_core = 4096;
  std::uint64_t synaptic_mem_per_core = 128 * 1024;  // bytes
  std::uint64_t bytes_per_synapse = 1;
};

inline void validate(const ChipConstraints& c) {
  if (c.max_compartments_per_core == 0 || c.max_fanin_per_core == 0 || c.max_fanout_per_core == 0 ||
      c.synaptic_mem_per_core == 0 || c.bytes_per_synapse == 0)
    fail(ErrorCode::InvalidConfig, "chip constraints must all be positive");
}

struct CoreUsage {
  std::size_t layer = 0;
  std::size_t first_neuron = 0;  // position-major order within the layer
  std::uint64_t compartments = 0;
  std::uint64_t fan_in = 0;
  std::uint64_t fan_out = 0;
  std::uint64_t synapses = 0;
  std::uint64_t synaptic_memory = 0;  // bytes
};

struct LayerUsage {
  std::string kind;
  std::uint64_t compartments = 0;
  std::uint64_t synapses = 0;
  std::uint64_t cores = 0;
};

struct MappingReport {
  std::uint64_t total_compartments = 0;
  std::uint64_t total_synapses = 0;
  std::uint64_t cores_used = 0;
  std::uint64_t lower_bound_cores = 0;  // ceil(compartments / capacity)
  std::vector<LayerUsage> layers;
  std::vector<CoreUsage> cores;
  bool feasible = true;
  std::vector<std::string> violations;
};

/// Calls fn(input index) for every presynaptic neuron of output neuron
/// (c, y, x), skipping taps that fall on padding.
template <class Fn>
void for_each_presynaptic(const LayerGeometry& g, std::uint32_t c, std::uint32_t y, std::uint32_t x, Fn&& fn) {
  const auto in_index = [&](std::uint32_t ci, std::uint32_t iy, std::uint32_t ix) {
    return (std::size_t{ci} * g.in.height + iy) * g.in.width + ix;
  };
  switch (g.kind) {
    case LayerKind::Dense:
      for (std::size_t i = 0; i < g.in.size(); ++i) fn(i);
      break;
    case LayerKind::AvgPool:
      for (std::uint32_t ky = 0; ky < g.kernel; ++ky)
        for (std::uint32_t kx = 0; kx < g.kernel; ++kx) {
          const std::uint32_t iy = y * g.stride + ky, ix = x * g.stride + kx;
          if (iy < g.in.height && ix < g.in.width) fn(in_index(c, iy, ix));
        }
      break;
    case LayerKind::Conv2d:
      for (std::uint32_t ci = 0; ci < g.in.channels; ++ci)
        for (std::uint32_t ky = 0; ky < g.kernel; ++ky)
          for (std::uint32_t kx = 0; kx < g.kernel; ++kx) {
            const std::int64_t iy = std::int64_t{y} * g.stride + ky - g.padding;
            const std::int64_t ix = std::int64_t{x} * g.stride + kx - g.padding;
            if (iy >= 0 && ix >= 0 && iy < g.in.height && ix < g.in.width)
              fn(in_index(ci, static_cast<std::uint32_t>(iy), static_cast<std::uint32_t>(ix)));
          }
      break;
  }
}

namespace detail {

/// Channel-major tensor index of the k-th neuron in position-major order.
inline std::size_t position_major_to_index(const Shape3& s, std::size_t k) {
  const std::size_t c = k % s.channels;
  const std::size_t pos = k / s.channels;
  return c * s.height * s.width + pos;
}

}  // namespace detail

/// Re-checks every core of a report against `limits`; returns the list of
/// violations (empty when the mapping is valid).
inline std::vector<std::string> check_mapping(const MappingReport& r, const ChipConstraints& limits) {
  std::vector<std::string> v;
  for (std::size_t k = 0; k < r.cores.size(); ++k) {
    const auto& c = r.cores[k];
    const std::string id = "core " + std::to_string(k) + " (layer " + std::to_string(c.layer) + ")";
    if (c.compartments > limits.max_compartments_per_core) v.push_back(id + ": compartments");
    if (c.fan_in > limits.max_fanin_per_core) v.push_back(id + ": fan-in");
    if (c.fan_out > limits.max_fanout_per_core) v.push_back(id + ": fan-out");
    if (c.synaptic_memory > limits.synaptic_mem_per_core) v.push_back(id + ": synaptic memory");
  }
  return v;
}

inline MappingReport map_layers(const std::vector<LayerGeometry>& layers, const ChipConstraints& limits = {}) {
  validate(limits);
  MappingReport rep;
  if (layers.empty()) return rep;
  const std::size_t L = layers.size();
  // core_of[n][tensor index] for layers already placed.
  std::vector<std::vector<std::uint32_t>> core_of(L);
  std::vector<std::vector<CoreUsage>> per_layer(L);
  std::uint32_t next_core = 0;  // provisional ids, renumbered at the end

  for (std::size_t n = L; n-- > 0;) {
    const LayerGeometry& g = layers[n];
    const std::size_t count = g.out.size();
    const std::uint64_t syn_per_neuron = g.fan_in();
    const std::uint64_t mem_per_neuron = syn_per_neuron * limits.bytes_per_synapse;

    // Destination cores of each neuron of this layer (through layer n+1).
    std::vector<std::vector<std::uint32_t>> dest(count);
    if (n + 1 < L) {
      const LayerGeometry& next = layers[n + 1];
      for (std::size_t k = 0; k < next.out.size(); ++k) {
        const std::size_t j = detail::position_major_to_index(next.out, k);
        const std::uint32_t core = core_of[n + 1][j];
        const std::uint32_t c = static_cast<std::uint32_t>(j / (std::size_t{next.out.height} * next.out.width));
        const std::size_t pos = j % (std::size_t{next.out.height} * next.out.width);
        for_each_presynaptic(next, c, static_cast<std::uint32_t>(pos / next.out.width),
                             static_cast<std::uint32_t>(pos % next.out.width), [&](std::size_t i) {
                               auto& d = dest[i];
                               if (d.empty() || d.back() != core) {
                                 if (std::find(d.begin(), d.end(), core) == d.end()) d.push_back(core);
                               }
                             });
      }
    }

    core_of[n].assign(count, 0);
    std::vector<std::uint32_t> seen(g.in.size(), 0);  // stamp of the core that last saw an input
    std::uint32_t stamp = 0;
    CoreUsage cur;
    bool open = false;
    auto close = [&] {
      if (open) per_layer[n].push_back(cur);
      open = false;
    };
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t j = detail::position_major_to_index(g.out, k);
      const std::uint32_t c = static_cast<std::uint32_t>(j / (std::size_t{g.out.height} * g.out.width));
      const std::size_t pos = j % (std::size_t{g.out.height} * g.out.width);
      const auto y = static_cast<std::uint32_t>(pos / g.out.width), x = static_cast<std::uint32_t>(pos % g.out.width);
      const std::uint64_t fan_out = dest[j].size();

      std::uint64_t alone_fan_in = 0;
      for_each_presynaptic(g, c, y, x, [&](std::size_t) { ++alone_fan_in; });
      if (alone_fan_in > limits.max_fanin_per_core || mem_per_neuron > limits.synaptic_mem_per_core ||
          fan_out > limits.max_fanout_per_core)
        fail(ErrorCode::Infeasible, "a single neuron of layer " + std::to_string(n) + " (" +
                                        std::string(to_string(g.kind)) + ") exceeds a per-core limit: fan-in " +
                                        std::to_string(alone_fan_in) + ", memory " + std::to_string(mem_per_neuron) +
                                        " B, fan-out " + std::to_string(fan_out));

      auto new_inputs = [&] {
        std::uint64_t fresh = 0;
        for_each_presynaptic(g, c, y, x, [&](std::size_t i) { fresh += seen[i] != stamp; });
        return fresh;
      };
      std::uint64_t fresh = open ? new_inputs() : 0;
      if (!open || cur.compartments + 1 > limits.max_compartments_per_core ||
          cur.fan_in + fresh > limits.max_fanin_per_core ||
          cur.synaptic_memory + mem_per_neuron > limits.synaptic_mem_per_core ||
          cur.fan_out + fan_out > limits.max_fanout_per_core) {
        close();
        cur = CoreUsage{};
        cur.layer = n;
        cur.first_neuron = k;
        open = true;
        ++stamp;
        ++next_core;
        fresh = new_inputs();
      }
      for_each_presynaptic(g, c, y, x, [&](std::size_t i) { seen[i] = stamp; });
      cur.compartments += 1;
      cur.fan_in += fresh;
      cur.fan_out += fan_out;
      cur.synapses += syn_per_neuron;
      cur.synaptic_memory += mem_per_neuron;
      core_of[n][j] = next_core - 1;
    }
    close();

    LayerUsage lu;
    lu.kind = std::string(to_string(g.kind));
    lu.compartments = count;
    lu.synapses = g.synapse_count();
    lu.cores = per_layer[n].size();
    rep.layers.insert(rep.layers.begin(), lu);
  }

  for (const auto& layer_cores : per_layer)
    for (const auto& c : layer_cores) rep.cores.push_back(c);
  for (const auto& l : rep.layers) {
    rep.total_compartments += l.compartments;
    rep.total_synapses += l.synapses;
  }
  rep.cores_used = rep.cores.size();
  rep.lower_bound_cores =
      (rep.total_compartments + limits.max_compartments_per_core - 1) / limits.max_compartments_per_core;
  rep.violations = check_mapping(rep, limits);
  rep.feasible = rep.violations.empty();
  return rep;
}

inline MappingReport map_resources(const QuantizedNetwork& q, const ChipConstraints& limits = {}) {
  std::vector<LayerGeometry> g;
  for (const auto& l : q.layers) g.push_back(l.geometry);
  return map_layers(g, limits);
}

}  // namespace carsnn
