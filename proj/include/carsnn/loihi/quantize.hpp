#pragma once

// Translation of a trained float network into the chip's fixed-point
// parameters.
//
// A weight w becomes an integer mantissa m with exponent e (wgtExp) such
// that one presynaptic spike adds m * 2^(6+e) to the compartment current.
// The float potential maps to the integer voltage through the factor
// scale * 2^6, so m = round(scale * w * 2^-e). With e = 0 this is the plain
// "multiply by 25" translation; a per-layer exponent is optional.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/snn/network.hpp"

namespace carsnn {

inline constexpr std::int32_t kDecayOne = 4096;  // 2^12
inline constexpr int kVoltageShift = 6;          // the chip's implicit 2^6
inline constexpr int kMinWgtExp = -6;            // keeps 2^(6+e) integral
inline constexpr int kMaxWgtExp = 7;

/// How mantissas are stored.
///  * Auto: a layer holding both signs uses even values in [-255, 254]
///    (8 bits of magnitude with one spent on sign); a single-sign layer
///    uses every integer in [-255, 255].
///  * Step1: every integer in [-128, 127].
enum class WeightEncoding { Auto, Step1 };

inline std::string_view to_string(WeightEncoding e) { return e == WeightEncoding::Auto ? "auto" : "step1"; }

inline WeightEncoding parse_weight_encoding(std::string_view s) {
  if (s == "auto") return WeightEncoding::Auto;
  if (s == "step1") return WeightEncoding::Step1;
  fail(ErrorCode::InvalidConfig, "unknown weight encoding '" + std::string(s) + "' (expected auto or step1)");
}

/// Fixed: wgtExp = 0 everywhere. PerLayer: each layer gets the smallest
/// exponent (finest resolution) whose mantissas still fit.
enum class WgtExpPolicy { Fixed, PerLayer };

inline std::string_view to_string(WgtExpPolicy p) { return p == WgtExpPolicy::Fixed ? "fixed" : "per-layer"; }

inline WgtExpPolicy parse_wgt_exp_policy(std::string_view s) {
  if (s == "fixed") return WgtExpPolicy::Fixed;
  if (s == "per-layer") return WgtExpPolicy::PerLayer;
  fail(ErrorCode::InvalidConfig, "unknown wgtExp policy '" + std::string(s) + "' (expected fixed or per-layer)");
}

/// Integer division by 2^12 in the decay terms. The chip's rounding is not
/// documented; truncation toward zero is the default.
enum class DecayRounding { TowardZero, Floor };

inline std::string_view to_string(DecayRounding r) { return r == DecayRounding::TowardZero ? "toward-zero" : "floor"; }

inline DecayRounding parse_decay_rounding(std::string_view s) {
  if (s == "toward-zero") return DecayRounding::TowardZero;
  if (s == "floor") return DecayRounding::Floor;
  fail(ErrorCode::InvalidConfig, "unknown rounding '" + std::string(s) + "' (expected toward-zero or floor)");
}

struct EncodingRange {
  std::int32_t lo = 0;
  std::int32_t hi = 0;
  std::int32_t step = 1;

  friend bool operator==(const EncodingRange&, const EncodingRange&) = default;
};

struct QuantizedLayer {
  LayerGeometry geometry;
  std::vector<std::int32_t> weights;  // canonical layout; empty for pooling
  std::int32_t pool_weight = 0;       // mantissa of every pooling tap
  int wgt_exp = 0;
  EncodingRange encoding;

  std::size_t neurons() const { return geometry.out.size(); }
  bool learnable() const { return geometry.kind != LayerKind::AvgPool; }

  friend bool operator==(const QuantizedLayer&, const QuantizedLayer&) = default;
};

struct LayerQuantStats {
  std::size_t count = 0;
  double max_abs_error = 0.0;   // float units, |w - dequantized|
  double mean_abs_error = 0.0;
  std::int32_t min_mantissa = 0;
  std::int32_t max_mantissa = 0;

  friend bool operator==(const LayerQuantStats&, const LayerQuantStats&) = default;
};

struct QuantizedNetwork {
  Variant variant = Variant::Custom;
  Shape3 input;
  std::vector<QuantizedLayer> layers;
  double scale = 25.0;
  std::int32_t vth_mant = 0;
  std::int32_t delta_v = 0;
  std::int32_t delta_i = kDecayOne;
  std::int64_t bias = 0;
  DecayRounding rounding = DecayRounding::TowardZero;
  /// Float parameters the translation started from.
  LifParams source_lif;
  std::vector<LayerQuantStats> stats;

  std::int64_t threshold() const { return static_cast<std::int64_t>(vth_mant) << kVoltageShift; }

  friend bool operator==(const QuantizedNetwork&, const QuantizedNetwork&) = default;
};

struct QuantizeOptions {
  double scale = 25.0;
  /// Current decay; 4096 makes the current equal this step's weighted input.
  std::int32_t delta_i = kDecayOne;
  /// Overrides the voltage decay derived from tau.
  std::optional<std::int32_t> delta_v;
  WeightEncoding encoding = WeightEncoding::Auto;
  WgtExpPolicy wgt_exp_policy = WgtExpPolicy::PerLayer;
  DecayRounding rounding = DecayRounding::TowardZero;
};

/// Voltage decay for a float decay factor tau: the largest integer d with
/// (4096 - d) / 4096 >= tau, i.e. floor(4096 * (1 - tau)). For tau = 0.2
/// this is 3276.
inline std::int32_t delta_v_for(double tau) {
  const double exact = static_cast<double>(kDecayOne) * (1.0 - tau);
  return static_cast<std::int32_t>(std::floor(exact + 1e-9));
}

inline std::int32_t vth_mant_for(double v_th, double scale) {
  return static_cast<std::int32_t>(std::llround(v_th * scale));
}

inline EncodingRange encoding_for(WeightEncoding enc, bool mixed_signs) {
  if (enc == WeightEncoding::Step1) return {-128, 127, 1};
  return mixed_signs ? EncodingRange{-255, 254, 2} : EncodingRange{-255, 255, 1};
}

/// Nearest representable mantissa for the real value `x` (already scaled).
inline std::int64_t encode_mantissa(double x, const EncodingRange& r) {
  return r.step == 1 ? std::llround(x) : r.step * std::llround(x / r.step);
}

inline double dequantize(std::int64_t mantissa, int wgt_exp, double scale) {
  return static_cast<double>(mantissa) * std::ldexp(1.0, wgt_exp) / scale;
}

namespace detail {

inline bool fits(std::span<const double> values, double factor, const EncodingRange& r) {
  for (double w : values) {
    const auto m = encode_mantissa(w * factor, r);
    if (m < r.lo || m > r.hi) return false;
  }
  return true;
}

}  // namespace detail

inline QuantizedNetwork quantize(const NetworkSpec& net, const QuantizeOptions& opt = {}) {
  validate(net);
  if (!(opt.scale > 0.0)) fail(ErrorCode::InvalidConfig, "scale must be > 0");
  if (net.pooling != PoolingMode::Spiking)
    fail(ErrorCode::InvalidConfig, "only spiking-pooling networks can be placed on the chip");
  if (opt.delta_i < 0 || opt.delta_i > kDecayOne) fail(ErrorCode::InvalidConfig, "delta_i must be in [0, 4096]");
  for (std::size_t n = 0; n < net.layers.size(); ++n)
    for (double b : net.layers[n].bias)
      if (b != 0.0) fail(ErrorCode::InvalidConfig, "layer " + std::to_string(n) + " has a nonzero bias");

  QuantizedNetwork q;
  q.variant = net.variant;
  q.input = net.input;
  q.scale = opt.scale;
  q.source_lif = net.lif;
  q.vth_mant = vth_mant_for(net.lif.v_th, opt.scale);
  q.delta_v = opt.delta_v ? *opt.delta_v : delta_v_for(net.lif.tau);
  q.delta_i = opt.delta_i;
  q.rounding = opt.rounding;
  if (q.delta_v < 0 || q.delta_v > kDecayOne) fail(ErrorCode::InvalidConfig, "delta_v must be in [0, 4096]");
  if (q.vth_mant <= 0) fail(ErrorCode::InvalidConfig, "threshold rounds to zero at this scale");

  for (std::size_t n = 0; n < net.layers.size(); ++n) {
    const LayerSpec& l = net.layers[n];
    const std::vector<double> pool_value{l.pool_weight()};
    const std::span<const double> values = l.learnable() ? std::span<const double>(l.weights) : pool_value;
    const bool has_pos = std::any_of(values.begin(), values.end(), [](double w) { return w > 0.0; });
    const bool has_neg = std::any_of(values.begin(), values.end(), [](double w) { return w < 0.0; });
    const EncodingRange range = encoding_for(opt.encoding, has_pos && has_neg);

    int e = 0;
    if (opt.wgt_exp_policy == WgtExpPolicy::PerLayer) {
      e = kMinWgtExp;
      while (e <= kMaxWgtExp && !detail::fits(values, opt.scale * std::ldexp(1.0, -e), range)) ++e;
    }
    const double factor = opt.scale * std::ldexp(1.0, -e);
    if (e > kMaxWgtExp || !detail::fits(values, factor, range)) {
      double peak = 0.0;
      for (double w : values) peak = std::max(peak, std::abs(w));
      fail(ErrorCode::WeightOverflow, "layer " + std::to_string(n) + " (" + std::string(to_string(l.kind())) +
                                          "): |w| up to " + std::to_string(peak) + " scales to " +
                                          std::to_string(peak * factor) + ", outside [" + std::to_string(range.lo) +
                                          ", " + std::to_string(range.hi) + "]");
    }

    QuantizedLayer ql;
    ql.geometry = l.geometry;
    ql.wgt_exp = e;
    ql.encoding = range;
    LayerQuantStats st;
    st.min_mantissa = std::numeric_limits<std::int32_t>::max();
    st.max_mantissa = std::numeric_limits<std::int32_t>::min();
    double err_sum = 0.0;
    auto record = [&](double w, std::int32_t m) {
      const double err = std::abs(w - dequantize(m, e, opt.scale));
      st.max_abs_error = std::max(st.max_abs_error, err);
      err_sum += err;
      st.min_mantissa = std::min(st.min_mantissa, m);
      st.max_mantissa = std::max(st.max_mantissa, m);
      ++st.count;
    };
    if (l.learnable()) {
      ql.weights.reserve(l.weights.size());
      for (double w : l.weights) {
        const auto m = static_cast<std::int32_t>(encode_mantissa(w * factor, range));
        ql.weights.push_back(m);
        record(w, m);
      }
    } else {
      ql.pool_weight = static_cast<std::int32_t>(encode_mantissa(l.pool_weight() * factor, range));
      record(l.pool_weight(), ql.pool_weight);
    }
    if (st.count == 0) st.min_mantissa = st.max_mantissa = 0;
    st.mean_abs_error = st.count ? err_sum / static_cast<double>(st.count) : 0.0;
    q.stats.push_back(st);
    q.layers.push_back(std::move(ql));
  }
  return q;
}

/// Float network whose weights are the exact real values the integer model
/// implements (mantissa * 2^e / scale). Pooling taps cannot be represented
/// in a NetworkSpec, so callers needing them use dequantized_pool_weight.
inline NetworkSpec dequantize(const QuantizedNetwork& q) {
  NetworkSpec net;
  net.variant = q.variant;
  net.input = q.input;
  net.lif = q.source_lif;
  net.pooling = PoolingMode::Spiking;
  for (const auto& ql : q.layers) {
    LayerSpec l;
    l.geometry = ql.geometry;
    l.weights.reserve(ql.weights.size());
    for (auto m : ql.weights) l.weights.push_back(dequantize(m, ql.wgt_exp, q.scale));
    l.bias.assign(ql.geometry.bias_count(), 0.0);
    net.layers.push_back(std::move(l));
  }
  return net;
}

inline double dequantized_pool_weight(const QuantizedNetwork& q, std::size_t n) {
  return dequantize(q.layers[n].pool_weight, q.layers[n].wgt_exp, q.scale);
}

}  // namespace carsnn
