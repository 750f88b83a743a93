#pragma once

// Spatio-temporal backpropagation through a recorded run.
//
// With delta = dL/do and eps = dL/du at (timestep t, layer n):
//
//   delta[t][N]  = -(y - mean_t o[.][N]) / (S * T)            (from the MSE loss)
//   delta[t][n]  = W[n+1]^T eps[t][n+1]                       (n < N)
//   eps[t][n]    = delta[t][n] * h(u[t][n])
//                + eps[t+1][n] * tau * (1 - o[t][n])          (t < T)
//
// h is the rectangular surrogate. At t = T the temporal term is absent, and
// at the output layer delta has no spatial term, which gives the four
// (t = T | t < T) x (n = N | n < N) cases. The reset path, where o[t]
// multiplies u[t] in the next update, is not differentiated by default; with
// `full_product_rule` delta[t][n] additionally receives eps[t+1][n] * (-tau * u[t][n]).
//
// Parameter gradients sum over time: dL/db = sum_t eps[t][n] and
// dL/dW = sum_t eps[t][n] (x) o[t][n-1].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/snn/kernels.hpp"
#include "carsnn/snn/network.hpp"
#include "carsnn/snn/simulate.hpp"

namespace carsnn {

/// dL/dW and dL/db per layer, in the canonical layouts of LayerSpec.
/// Pooling layers have empty entries.
struct GradientSet {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  static GradientSet zeros_like(const NetworkSpec& net) {
    GradientSet g;
    for (const auto& l : net.layers) {
      g.weights.emplace_back(l.weights.size(), 0.0);
      g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
  }

  GradientSet& operator+=(const GradientSet& other) {
    for (std::size_t n = 0; n < weights.size(); ++n) {
      for (std::size_t i = 0; i < weights[n].size(); ++i) weights[n][i] += other.weights[n][i];
      for (std::size_t i = 0; i < bias[n].size(); ++i) bias[n][i] += other.bias[n][i];
    }
    return *this;
  }

  void scale(double s) {
    for (auto& w : weights)
      for (double& v : w) v *= s;
    for (auto& b : bias)
      for (double& v : b) v *= s;
  }

  bool all_zero() const {
    for (const auto& w : weights)
      for (double v : w)
        if (v != 0.0) return false;
    for (const auto& b : bias)
      for (double v : b)
        if (v != 0.0) return false;
    return true;
  }
};

inline double max_abs_diff(const GradientSet& a, const GradientSet& b) {
  double m = 0.0;
  for (std::size_t n = 0; n < a.weights.size(); ++n) {
    for (std::size_t i = 0; i < a.weights[n].size(); ++i) m = std::max(m, std::abs(a.weights[n][i] - b.weights[n][i]));
    for (std::size_t i = 0; i < a.bias[n].size(); ++i) m = std::max(m, std::abs(a.bias[n][i] - b.bias[n][i]));
  }
  return m;
}

/// dL/do and dL/du for every layer and timestep, shaped like StateRecord
/// ([t * neurons + i]). Only layers that the backward sweep reaches (from
/// the lowest learnable layer up) are filled; the rest stay empty.
struct AdjointRecord {
  std::vector<std::vector<double>> dl_do;
  std::vector<std::vector<double>> dl_du;
};

struct BackwardOptions {
  bool full_product_rule = false;
  /// S in the loss normalisation; 0 means "number of segments in the record".
  std::size_t sample_count = 0;
};

inline std::vector<double> one_hot(int label, std::size_t classes = 2) {
  std::vector<double> y(classes, 0.0);
  y.at(static_cast<std::size_t>(label)) = 1.0;
  return y;
}

/// Mean output spike rate of one segment.
inline std::vector<double> mean_output(const StateRecord& rec, std::uint32_t segment) {
  const auto& out = rec.output();
  std::vector<double> m(out.neurons, 0.0);
  for (std::uint32_t t = segment * rec.segment_length; t < (segment + 1) * rec.segment_length; ++t) {
    const auto o = out.o_at(t);
    for (std::size_t i = 0; i < out.neurons; ++i) m[i] += o[i];
  }
  for (double& v : m) v /= rec.segment_length;
  return m;
}

/// MSE between one-hot labels and mean output spike rates, one sample per
/// segment: L = 1/(2S) * sum_s ||y_s - mean_t o_s||^2.
inline double mse_loss(const StateRecord& rec, std::span<const int> labels, std::size_t sample_count = 0) {
  if (rec.timesteps == 0 || rec.segment_length == 0) fail(ErrorCode::MissingRecord, "empty record");
  if (labels.size() != rec.segments())
    fail(ErrorCode::ShapeMismatch, std::to_string(labels.size()) + " labels for " + std::to_string(rec.segments()) +
                                       " segments");
  if (rec.output().neurons != 2) fail(ErrorCode::ShapeMismatch, "loss expects two output neurons");
  const double s = static_cast<double>(sample_count ? sample_count : labels.size());
  double sum = 0.0;
  for (std::uint32_t seg = 0; seg < rec.segments(); ++seg) {
    const auto m = mean_output(rec, seg);
    const auto y = one_hot(labels[seg], m.size());
    for (std::size_t i = 0; i < m.size(); ++i) sum += (y[i] - m[i]) * (y[i] - m[i]);
  }
  return sum / (2.0 * s);
}

inline GradientSet backward(const NetworkSpec& net, const StateRecord& rec, std::span<const int> labels,
                            const BackwardOptions& options = {}, AdjointRecord* adjoint = nullptr) {
  validate(net);
  if (rec.timesteps == 0 || rec.layers.size() != net.layers.size())
    fail(ErrorCode::MissingRecord, "record does not belong to this network");
  if (labels.size() != rec.segments())
    fail(ErrorCode::ShapeMismatch, std::to_string(labels.size()) + " labels for " + std::to_string(rec.segments()) +
                                       " segments");
  const std::size_t layers = net.layers.size();
  const std::size_t top = layers - 1;
  const LifParams& p = net.lif;
  const double tau = p.tau;
  const double S = static_cast<double>(options.sample_count ? options.sample_count : labels.size());

  std::size_t lowest = layers;
  for (std::size_t n = 0; n < layers; ++n)
    if (net.layers[n].learnable()) {
      lowest = n;
      break;
    }
  GradientSet grads = GradientSet::zeros_like(net);
  if (lowest == layers) return grads;

  std::vector<LayerKernel<double>> kernels;
  kernels.reserve(layers);
  for (const auto& l : net.layers) kernels.emplace_back(l.geometry, std::span<const double>(l.weights), l.pool_weight());

  std::vector<std::vector<double>> grad_im(layers);
  for (std::size_t n = lowest; n < layers; ++n) grad_im[n].assign(net.layers[n].weights.size(), 0.0);

  std::vector<std::vector<double>> eps_now(layers), eps_next(layers), delta(layers), surr(layers);
  std::vector<std::vector<std::uint8_t>> need(layers);
  for (std::size_t n = lowest; n < layers; ++n) {
    const std::size_t k = net.layers[n].neurons();
    eps_now[n].assign(k, 0.0);
    eps_next[n].assign(k, 0.0);
    delta[n].assign(k, 0.0);
    surr[n].assign(k, 0.0);
    need[n].assign(k, 0);
  }
  if (adjoint) {
    adjoint->dl_do.assign(layers, {});
    adjoint->dl_du.assign(layers, {});
    for (std::size_t n = lowest; n < layers; ++n) {
      adjoint->dl_do[n].assign(net.layers[n].neurons() * rec.timesteps, 0.0);
      adjoint->dl_du[n].assign(net.layers[n].neurons() * rec.timesteps, 0.0);
    }
  }

  std::vector<std::vector<double>> target(rec.segments()), rate(rec.segments());
  for (std::uint32_t seg = 0; seg < rec.segments(); ++seg) {
    rate[seg] = mean_output(rec, seg);
    target[seg] = one_hot(labels[seg], rate[seg].size());
  }

  for (std::size_t ti = rec.timesteps; ti-- > 0;) {
    const std::uint32_t seg = static_cast<std::uint32_t>(ti / rec.segment_length);
    // Whether u[t+1] was computed from u[t] (same segment, or carried state).
    const bool linked = ti + 1 < rec.timesteps && (rec.carry_state || (ti + 1) % rec.segment_length != 0);

    for (std::size_t n = lowest; n < layers; ++n) {
      if (!net.is_spiking(n)) continue;
      const auto u = rec.layers[n].u_at(ti);
      for (std::size_t i = 0; i < u.size(); ++i) {
        surr[n][i] = surrogate_grad(u[i], p);
        need[n][i] = surr[n][i] != 0.0;
      }
    }

    for (std::size_t n = top + 1; n-- > lowest;) {
      const bool spiking = net.is_spiking(n);
      auto& d = delta[n];
      if (n == top) {
        const double scale = 1.0 / (S * rec.segment_length);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = -(target[seg][i] - rate[seg][i]) * scale;
      } else {
        kernels[n + 1].adjoint<double, double>(eps_now[n + 1],
                                               spiking ? std::span<const std::uint8_t>(need[n])
                                                       : std::span<const std::uint8_t>(),
                                               d);
      }
      const auto u = rec.layers[n].u_at(ti);
      const auto o = rec.layers[n].o_at(ti);
      auto& e = eps_now[n];
      if (!spiking) {
        e = d;
      } else {
        if (options.full_product_rule && linked)
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += eps_next[n][i] * (-tau * u[i]);
        for (std::size_t i = 0; i < e.size(); ++i) {
          double v = d[i] * surr[n][i];
          if (linked) v += eps_next[n][i] * tau * (1.0 - o[i]);
          e[i] = v;
        }
      }
      if (adjoint) {
        std::copy(d.begin(), d.end(), adjoint->dl_do[n].begin() + static_cast<std::ptrdiff_t>(ti * d.size()));
        std::copy(e.begin(), e.end(), adjoint->dl_du[n].begin() + static_cast<std::ptrdiff_t>(ti * e.size()));
      }
      if (net.layers[n].learnable()) {
        if (n == 0)
          kernels[0].accumulate_weight_grad<std::uint8_t, double>(rec.input_at(ti), e, grad_im[0]);
        else
          kernels[n].accumulate_weight_grad<double, double>(rec.layers[n - 1].o_at(ti), e, grad_im[n]);
        auto& gb = grads.bias[n];
        const std::size_t per_channel = e.size() / gb.size();
        for (std::size_t i = 0; i < e.size(); ++i) gb[i / per_channel] += e[i];
      }
    }
    std::swap(eps_now, eps_next);
  }

  for (std::size_t n = lowest; n < layers; ++n)
    if (net.layers[n].learnable()) grads.weights[n] = kernels[n].to_canonical(grad_im[n]);
  return grads;
}

inline GradientSet backward(const NetworkSpec& net, const StateRecord& rec, int label,
                            const BackwardOptions& options = {}) {
  const std::vector<int> labels(rec.segments(), label);
  return backward(net, rec, labels, options);
}

}  // namespace carsnn
