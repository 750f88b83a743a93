#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/core/rng.hpp"
#include "carsnn/snn/layer.hpp"
#include "carsnn/snn/lif.hpp"

namespace carsnn {

enum class Variant { Full128, Win100, Win50, Custom };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Full128: return "full128";
    case Variant::Win100: return "win100";
    case Variant::Win50: return "win50";
    case Variant::Custom: return "custom";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "full128") return Variant::Full128;
  if (s == "win100") return Variant::Win100;
  if (s == "win50") return Variant::Win50;
  if (s == "custom") return Variant::Custom;
  fail(ErrorCode::InvalidConfig, "unknown variant '" + std::string(s) + "' (expected full128, win100 or win50)");
}

/// Spiking pooling feeds LIF compartments with fixed 1/k^2 weights (the
/// structure the chip runs); linear pooling passes the averaged values on
/// without a neuron.
enum class PoolingMode { Spiking, Linear };

inline std::string_view to_string(PoolingMode m) { return m == PoolingMode::Spiking ? "spiking" : "linear"; }

inline PoolingMode parse_pooling(std::string_view s) {
  if (s == "spiking") return PoolingMode::Spiking;
  if (s == "linear") return PoolingMode::Linear;
  fail(ErrorCode::InvalidConfig, "unknown pooling mode '" + std::string(s) + "'");
}

struct NetworkSpec {
  Variant variant = Variant::Custom;
  Shape3 input;
  std::vector<LayerSpec> layers;
  LifParams lif;
  PoolingMode pooling = PoolingMode::Spiking;

  const LayerSpec& output_layer() const { return layers.back(); }
  /// Whether layer n owns LIF state (everything except linear pooling).
  bool is_spiking(std::size_t n) const {
    return !(layers[n].kind() == LayerKind::AvgPool && pooling == PoolingMode::Linear);
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Checks the shape chain, parameter sizes and the two-neuron output.
inline void validate(const NetworkSpec& net) {
  validate(net.lif);
  if (net.layers.empty()) fail(ErrorCode::ShapeMismatch, "network has no layers");
  Shape3 shape = net.input;
  for (std::size_t n = 0; n < net.layers.size(); ++n) {
    const auto& l = net.layers[n];
    const auto& g = l.geometry;
    if (!(g.in == shape))
      fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(n) + " expects " + to_string(g.in) + " but receives " +
                                         to_string(shape));
    if (l.weights.size() != g.weight_count() || l.bias.size() != g.bias_count())
      fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(n) + " parameter sizes do not match its geometry");
    shape = g.out;
  }
  if (shape.size() != 2) fail(ErrorCode::ShapeMismatch, "output layer must have exactly 2 neurons");
  if (!net.is_spiking(net.layers.size() - 1)) fail(ErrorCode::ShapeMismatch, "output layer must be spiking");
}

/// Uniform in [-g/sqrt(fan_in), +g/sqrt(fan_in)] for learnable weights
/// (g = `gain`, 1 by default), biases zero.
inline void init_weights(NetworkSpec& net, Rng& rng, double gain = 1.0) {
  for (auto& l : net.layers) {
    l.weights.assign(l.geometry.weight_count(), 0.0);
    l.bias.assign(l.geometry.bias_count(), 0.0);
    if (!l.learnable()) continue;
    const double bound = gain / std::sqrt(static_cast<double>(l.geometry.fan_in()));
    for (double& w : l.weights) w = uniform_real(rng, -bound, bound);
  }
}

/// Assembles a network from geometries; weights are zero until
/// init_weights runs.
inline NetworkSpec make_network(Shape3 input, const std::vector<LayerGeometry>& geometries, LifParams lif = {},
                                PoolingMode pooling = PoolingMode::Spiking) {
  NetworkSpec net;
  net.input = input;
  net.lif = lif;
  net.pooling = pooling;
  for (const auto& g : geometries) {
    LayerSpec l;
    l.geometry = g;
    l.weights.assign(g.weight_count(), 0.0);
    l.bias.assign(g.bias_count(), 0.0);
    net.layers.push_back(std::move(l));
  }
  validate(net);
  return net;
}

inline std::uint32_t input_side(Variant v) {
  switch (v) {
    case Variant::Full128: return 128;
    case Variant::Win100: return 100;
    case Variant::Win50: return 50;
    case Variant::Custom: break;
  }
  fail(ErrorCode::InvalidConfig, "custom networks have no fixed input size");
}

/// The three network stacks: pool4, conv3x3(32), pool2, conv3x3(32),
/// pool2, dense(hidden), dense(2), differing only in input side and hidden
/// width (1024, 512, 144).
inline NetworkSpec build_network(Variant variant, std::uint64_t seed, LifParams lif = {},
                                 PoolingMode pooling = PoolingMode::Spiking, double init_gain = 1.0) {
  const std::uint32_t side = input_side(variant);
  const std::uint32_t hidden = variant == Variant::Full128 ? 1024 : variant == Variant::Win100 ? 512 : 144;
  std::vector<LayerGeometry> g;
  const Shape3 input{2, side, side};
  g.push_back(make_avg_pool(input, 4));
  g.push_back(make_conv(g.back().out, 32, 3, 1, 1));
  g.push_back(make_avg_pool(g.back().out, 2));
  g.push_back(make_conv(g.back().out, 32, 3, 1, 1));
  g.push_back(make_avg_pool(g.back().out, 2));
  g.push_back(make_dense(g.back().out, hidden));
  g.push_back(make_dense(g.back().out, 2));
  NetworkSpec net = make_network(input, g, lif, pooling);
  net.variant = variant;
  Rng rng = named_rng(seed, "init");
  init_weights(net, rng, init_gain);
  return net;
}

}  // namespace carsnn
