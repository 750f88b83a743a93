#pragma once

// Synaptic propagation for the three layer kinds, written once and
// instantiated for real-valued training (W = double) and the integer chip
// emulator (W = int32_t, accumulators int64_t).
//
// Weights are kept "input-major" internally ([ci][ky][kx][co] for conv,
// [in][out] for dense) so that a spike scatters into a contiguous weight
// row. Inputs that are exactly zero are skipped, which is what makes sparse
// spike traffic cheap.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/snn/layer.hpp"

namespace carsnn {

template <class W>
class LayerKernel {
 public:
  LayerKernel() = default;

  /// `weights` in canonical layout (see LayerSpec); ignored for pooling,
  /// which uses `pool_weight` for every tap.
  LayerKernel(const LayerGeometry& g, std::span<const W> weights, W pool_weight) : g_(g), pool_weight_(pool_weight) {
    if (g.kind == LayerKind::AvgPool) {
      if (g.stride != g.kernel || g.padding != 0)
        fail(ErrorCode::InvalidConfig, "pooling must use stride == kernel and no padding");
      return;
    }
    if (weights.size() != g.weight_count())
      fail(ErrorCode::ShapeMismatch, "expected " + std::to_string(g.weight_count()) + " weights, got " +
                                         std::to_string(weights.size()));
    wim_.resize(weights.size());
    if (g.kind == LayerKind::Dense) {
      const std::size_t in = g.in.size(), out = g.out.size();
      for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i) wim_[i * out + o] = weights[o * in + i];
    } else {
      const std::size_t co_n = g.out.channels, ci_n = g.in.channels, k = g.kernel;
      for (std::size_t co = 0; co < co_n; ++co)
        for (std::size_t ci = 0; ci < ci_n; ++ci)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx)
              wim_[((ci * k + ky) * k + kx) * co_n + co] = weights[((co * ci_n + ci) * k + ky) * k + kx];
    }
  }

  const LayerGeometry& geometry() const { return g_; }

  /// out = W * in (out is overwritten).
  template <class Acc, class In>
  void forward(std::span<const In> in, std::span<Acc> out) const {
    std::fill(out.begin(), out.end(), Acc{});
    switch (g_.kind) {
      case LayerKind::AvgPool: {
        const std::uint32_t k = g_.kernel;
        for (std::uint32_t c = 0; c < g_.in.channels; ++c)
          for (std::uint32_t y = 0; y < g_.in.height; ++y) {
            const In* row = in.data() + (std::size_t{c} * g_.in.height + y) * g_.in.width;
            Acc* orow = out.data() + (std::size_t{c} * g_.out.height + y / k) * g_.out.width;
            for (std::uint32_t x = 0; x < g_.in.width; ++x)
              if (row[x] != In{}) orow[x / k] += static_cast<Acc>(pool_weight_) * static_cast<Acc>(row[x]);
          }
        break;
      }
      case LayerKind::Dense: {
        const std::size_t n_out = g_.out.size();
        for (std::size_t i = 0; i < in.size(); ++i) {
          if (in[i] == In{}) continue;
          const W* w = wim_.data() + i * n_out;
          const Acc v = static_cast<Acc>(in[i]);
          for (std::size_t o = 0; o < n_out; ++o) out[o] += static_cast<Acc>(w[o]) * v;
        }
        break;
      }
      case LayerKind::Conv2d:
        for_each_active_tap(in, [&](std::size_t row_offset, std::size_t base, Acc v) {
          const W* w = wim_.data() + row_offset;
          const std::size_t plane = std::size_t{g_.out.height} * g_.out.width;
          for (std::uint32_t co = 0; co < g_.out.channels; ++co) out[co * plane + base] += static_cast<Acc>(w[co]) * v;
        });
        break;
    }
  }

  /// delta_in[i] = sum_o W(o, i) * eps[o] for every input i with need[i]
  /// set (all inputs when `need` is empty); other entries are zeroed.
  template <class Acc, class E>
  void adjoint(std::span<const E> eps, std::span<const std::uint8_t> need, std::span<Acc> delta_in) const {
    const bool all = need.empty();
    switch (g_.kind) {
      case LayerKind::AvgPool: {
        const std::uint32_t k = g_.kernel;
        for (std::uint32_t c = 0; c < g_.in.channels; ++c)
          for (std::uint32_t y = 0; y < g_.in.height; ++y) {
            const std::size_t row = (std::size_t{c} * g_.in.height + y) * g_.in.width;
            const E* erow = eps.data() + (std::size_t{c} * g_.out.height + y / k) * g_.out.width;
            for (std::uint32_t x = 0; x < g_.in.width; ++x)
              delta_in[row + x] =
                  (all || need[row + x]) ? static_cast<Acc>(pool_weight_) * static_cast<Acc>(erow[x / k]) : Acc{};
          }
        break;
      }
      case LayerKind::Dense: {
        const std::size_t n_out = g_.out.size();
        for (std::size_t i = 0; i < delta_in.size(); ++i) {
          if (!all && !need[i]) {
            delta_in[i] = Acc{};
            continue;
          }
          const W* w = wim_.data() + i * n_out;
          Acc acc{};
          for (std::size_t o = 0; o < n_out; ++o) acc += static_cast<Acc>(w[o]) * static_cast<Acc>(eps[o]);
          delta_in[i] = acc;
        }
        break;
      }
      case LayerKind::Conv2d: {
        const std::size_t plane = std::size_t{g_.out.height} * g_.out.width;
        for (std::uint32_t ci = 0; ci < g_.in.channels; ++ci)
          for (std::uint32_t iy = 0; iy < g_.in.height; ++iy)
            for (std::uint32_t ix = 0; ix < g_.in.width; ++ix) {
              const std::size_t i = (std::size_t{ci} * g_.in.height + iy) * g_.in.width + ix;
              if (!all && !need[i]) {
                delta_in[i] = Acc{};
                continue;
              }
              Acc acc{};
              for_each_tap(ci, iy, ix, [&](std::size_t row_offset, std::size_t base) {
                const W* w = wim_.data() + row_offset;
                for (std::uint32_t co = 0; co < g_.out.channels; ++co)
                  acc += static_cast<Acc>(w[co]) * static_cast<Acc>(eps[co * plane + base]);
              });
              delta_in[i] = acc;
            }
        break;
      }
    }
  }

  /// grad += eps (x) in, accumulated in the input-major layout. Pooling
  /// layers have nothing to learn and ignore the call.
  template <class In, class E>
  void accumulate_weight_grad(std::span<const In> in, std::span<const E> eps, std::span<double> grad_im) const {
    switch (g_.kind) {
      case LayerKind::AvgPool: break;
      case LayerKind::Dense: {
        const std::size_t n_out = g_.out.size();
        for (std::size_t i = 0; i < in.size(); ++i) {
          if (in[i] == In{}) continue;
          double* gr = grad_im.data() + i * n_out;
          const double v = static_cast<double>(in[i]);
          for (std::size_t o = 0; o < n_out; ++o) gr[o] += static_cast<double>(eps[o]) * v;
        }
        break;
      }
      case LayerKind::Conv2d: {
        const std::size_t plane = std::size_t{g_.out.height} * g_.out.width;
        for_each_active_tap(in, [&](std::size_t row_offset, std::size_t base, double v) {
          double* gr = grad_im.data() + row_offset;
          for (std::uint32_t co = 0; co < g_.out.channels; ++co)
            gr[co] += static_cast<double>(eps[co * plane + base]) * v;
        });
        break;
      }
    }
  }

  /// Converts an input-major gradient buffer back to the canonical layout.
  std::vector<double> to_canonical(std::span<const double> grad_im) const {
    std::vector<double> out(grad_im.size());
    if (g_.kind == LayerKind::Dense) {
      const std::size_t in = g_.in.size(), n_out = g_.out.size();
      for (std::size_t i = 0; i < in; ++i)
        for (std::size_t o = 0; o < n_out; ++o) out[o * in + i] = grad_im[i * n_out + o];
    } else if (g_.kind == LayerKind::Conv2d) {
      const std::size_t co_n = g_.out.channels, ci_n = g_.in.channels, k = g_.kernel;
      for (std::size_t co = 0; co < co_n; ++co)
        for (std::size_t ci = 0; ci < ci_n; ++ci)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx)
              out[((co * ci_n + ci) * k + ky) * k + kx] = grad_im[((ci * k + ky) * k + kx) * co_n + co];
    }
    return out;
  }

 private:
  // Visits every (kernel tap, output position) reached by input (ci, iy, ix):
  // fn(offset of the input-major weight row, output spatial index).
  template <class Fn>
  void for_each_tap(std::uint32_t ci, std::uint32_t iy, std::uint32_t ix, Fn&& fn) const {
    const auto k = static_cast<std::int64_t>(g_.kernel);
    const auto pad = static_cast<std::int64_t>(g_.padding);
    const auto stride = static_cast<std::int64_t>(g_.stride);
    const std::size_t co_n = g_.out.channels;
    for (std::int64_t ky = 0; ky < k; ++ky) {
      const std::int64_t ny = static_cast<std::int64_t>(iy) + pad - ky;
      if (ny < 0 || ny % stride) continue;
      const std::int64_t oy = ny / stride;
      if (oy >= g_.out.height) continue;
      for (std::int64_t kx = 0; kx < k; ++kx) {
        const std::int64_t nx = static_cast<std::int64_t>(ix) + pad - kx;
        if (nx < 0 || nx % stride) continue;
        const std::int64_t ox = nx / stride;
        if (ox >= g_.out.width) continue;
        fn(((static_cast<std::size_t>(ci) * g_.kernel + static_cast<std::size_t>(ky)) * g_.kernel +
            static_cast<std::size_t>(kx)) *
               co_n,
           static_cast<std::size_t>(oy) * g_.out.width + static_cast<std::size_t>(ox));
      }
    }
  }

  template <class In, class Fn>
  void for_each_active_tap(std::span<const In> in, Fn&& fn) const {
    for (std::uint32_t ci = 0; ci < g_.in.channels; ++ci)
      for (std::uint32_t iy = 0; iy < g_.in.height; ++iy)
        for (std::uint32_t ix = 0; ix < g_.in.width; ++ix) {
          const In v = in[(std::size_t{ci} * g_.in.height + iy) * g_.in.width + ix];
          if (v == In{}) continue;
          for_each_tap(ci, iy, ix, [&](std::size_t row, std::size_t base) { fn(row, base, v); });
        }
  }

  LayerGeometry g_;
  W pool_weight_{};
  std::vector<W> wim_;
};

}  // namespace carsnn
