#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "carsnn/core/error.hpp"

namespace carsnn {

struct Shape3 {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;

  std::size_t size() const { return std::size_t{channels} * height * width; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

inline std::string to_string(const Shape3& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

enum class LayerKind { AvgPool, Conv2d, Dense };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::AvgPool: return "avg_pool";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Dense: return "dense";
  }
  return "?";
}

inline LayerKind parse_layer_kind(std::string_view s) {
  if (s == "avg_pool") return LayerKind::AvgPool;
  if (s == "conv2d") return LayerKind::Conv2d;
  if (s == "dense") return LayerKind::Dense;
  fail(ErrorCode::InvalidConfig, "unknown layer kind '" + std::string(s) + "'");
}

/// Connectivity of one layer. Activations are laid out [channel][y][x];
/// dense layers see their input flattened in that order and produce an
/// out_features x 1 x 1 shape.
struct LayerGeometry {
  LayerKind kind = LayerKind::Dense;
  Shape3 in;
  Shape3 out;
  std::uint32_t kernel = 1;
  std::uint32_t padding = 0;
  std::uint32_t stride = 1;

  /// Synapses feeding one output neuron.
  std::size_t fan_in() const {
    switch (kind) {
      case LayerKind::AvgPool: return std::size_t{kernel} * kernel;
      case LayerKind::Conv2d: return std::size_t{in.channels} * kernel * kernel;
      case LayerKind::Dense: return in.size();
    }
    return 0;
  }

  /// Learnable weight count (pooling weights are fixed and not stored).
  std::size_t weight_count() const {
    switch (kind) {
      case LayerKind::AvgPool: return 0;
      case LayerKind::Conv2d: return std::size_t{out.channels} * in.channels * kernel * kernel;
      case LayerKind::Dense: return out.size() * in.size();
    }
    return 0;
  }

  std::size_t bias_count() const { return kind == LayerKind::AvgPool ? 0 : out.channels; }

  /// Total synapses: every output neuron counts its full kernel, including
  /// taps that fall on zero padding.
  std::size_t synapse_count() const { return out.size() * fan_in(); }

  friend bool operator==(const LayerGeometry&, const LayerGeometry&) = default;
};

inline std::uint32_t ceil_div(std::uint32_t a, std::uint32_t b) { return (a + b - 1) / b; }

/// Average pooling with stride = kernel and ceiling output size: a partial
/// window at the border is zero-padded and still divided by kernel^2.
/// Ceiling arithmetic is what makes 50 -> 13 -> 7 -> 4 and
/// 100 -> 25 -> 13 -> 7 (dense inputs 512 and 1568).
inline LayerGeometry make_avg_pool(Shape3 in, std::uint32_t kernel) {
  if (kernel == 0) fail(ErrorCode::InvalidConfig, "pool kernel must be > 0");
  LayerGeometry g{LayerKind::AvgPool, in, {in.channels, ceil_div(in.height, kernel), ceil_div(in.width, kernel)},
                  kernel, 0, kernel};
  return g;
}

inline LayerGeometry make_conv(Shape3 in, std::uint32_t out_channels, std::uint32_t kernel, std::uint32_t padding,
                               std::uint32_t stride) {
  if (kernel == 0 || stride == 0) fail(ErrorCode::InvalidConfig, "conv kernel and stride must be > 0");
  if (in.height + 2 * padding < kernel || in.width + 2 * padding < kernel)
    fail(ErrorCode::ShapeMismatch, "conv kernel larger than padded input " + to_string(in));
  const std::uint32_t oh = (in.height + 2 * padding - kernel) / stride + 1;
  const std::uint32_t ow = (in.width + 2 * padding - kernel) / stride + 1;
  return LayerGeometry{LayerKind::Conv2d, in, {out_channels, oh, ow}, kernel, padding, stride};
}

inline LayerGeometry make_dense(Shape3 in, std::uint32_t out_features) {
  return LayerGeometry{LayerKind::Dense, in, {out_features, 1, 1}, 1, 0, 1};
}

/// A layer with its parameters. Weights are [out_ch][in_ch][ky][kx] for
/// convolutions and [out][in] for dense layers; pooling layers carry no
/// stored weights (each tap is 1/kernel^2).
struct LayerSpec {
  LayerGeometry geometry;
  std::vector<double> weights;
  std::vector<double> bias;

  LayerKind kind() const { return geometry.kind; }
  bool learnable() const { return geometry.kind != LayerKind::AvgPool; }
  std::size_t neurons() const { return geometry.out.size(); }
  double pool_weight() const { return 1.0 / (static_cast<double>(geometry.kernel) * geometry.kernel); }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

}  // namespace carsnn
