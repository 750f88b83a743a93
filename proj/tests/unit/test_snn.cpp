#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "carsnn/carsnn.hpp"
#include "support/random_nets.hpp"
#include "support/unrolled_oracle.hpp"

using namespace carsnn;

// ---- architecture -------------------------------------------------------------

TEST(Architecture, DenseInputSizesFollowCeilingPooling) {
  const std::array<std::pair<Variant, std::array<std::size_t, 2>>, 3> expected{{
      {Variant::Full128, {2048, 1024}},
      {Variant::Win50, {512, 144}},
      {Variant::Win100, {1568, 512}},
  }};
  for (const auto& [variant, dims] : expected) {
    const NetworkSpec net = build_network(variant, 1);
    ASSERT_EQ(net.layers.size(), 7u);
    EXPECT_EQ(net.layers[5].geometry.in.size(), dims[0]) << to_string(variant);
    EXPECT_EQ(net.layers[5].geometry.out.size(), dims[1]);
    EXPECT_EQ(net.layers[6].geometry.out.size(), 2u);
  }
}

TEST(Architecture, SpatialChains) {
  EXPECT_EQ(build_network(Variant::Win50, 1).layers[4].geometry.out, (Shape3{32, 4, 4}));
  EXPECT_EQ(build_network(Variant::Win100, 1).layers[4].geometry.out, (Shape3{32, 7, 7}));
  EXPECT_EQ(build_network(Variant::Full128, 1).layers[4].geometry.out, (Shape3{32, 8, 8}));
}

TEST(Architecture, ConvolutionOutputSize) {
  EXPECT_EQ(make_conv({2, 7, 5}, 4, 3, 0, 2).out, (Shape3{4, 3, 2}));
  EXPECT_EQ(make_conv({2, 5, 5}, 1, 3, 1, 1).out, (Shape3{1, 5, 5}));
  EXPECT_THROW(make_conv({1, 2, 2}, 1, 5, 0, 1), Error);
}

TEST(Architecture, InitIsSeededAndBounded) {
  const NetworkSpec a = build_network(Variant::Win50, 3), b = build_network(Variant::Win50, 3);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, build_network(Variant::Win50, 4));
  for (const auto& l : a.layers) {
    for (double v : l.bias) EXPECT_EQ(v, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.geometry.fan_in()));
    for (double w : l.weights) EXPECT_LE(std::abs(w), bound);
  }
}

TEST(Architecture, ValidateCatchesBrokenChains) {
  NetworkSpec net = build_network(Variant::Win50, 1);
  net.layers[3].weights.pop_back();
  EXPECT_THROW(validate(net), Error);
  EXPECT_THROW(make_network({2, 4, 4}, {make_dense({2, 4, 4}, 3)}), Error);  // 3 outputs
  EXPECT_THROW(make_network({2, 4, 4}, {make_dense({2, 4, 5}, 2)}), Error);  // shape chain
}

// ---- LIF -------------------------------------------------------------------------

TEST(Lif, DecayWithoutSpike) {
  const LifOutput r = lif_step(0.3, false, 0.2, 0.0, {});
  EXPECT_NEAR(r.u, 0.26, 1e-15);
  EXPECT_FALSE(r.spike);
}

TEST(Lif, MultiplicativeReset) {
  EXPECT_EQ(lif_step(123.0, true, 0.0, 0.0, {}).u, 0.0);
}

TEST(Lif, CrossingFires) {
  const LifOutput r = lif_step(0.2, false, 0.5, 0.0, {});
  EXPECT_NEAR(r.u, 0.54, 1e-15);
  EXPECT_TRUE(r.spike);
  EXPECT_TRUE(lif_step(0.0, false, 0.4, 0.0, {}).spike);  // threshold is inclusive
}

TEST(Lif, SurrogateWindow) {
  const LifParams p;
  EXPECT_DOUBLE_EQ(surrogate_grad(0.4, p), 1.25);
  EXPECT_EQ(surrogate_grad(0.81, p), 0.0);
  EXPECT_EQ(surrogate_grad(0.0, p), 0.0);
  EXPECT_DOUBLE_EQ(surrogate_grad(0.01, p), 1.25);
}

TEST(Lif, ParameterValidation) {
  LifParams p;
  p.tau = 1.0;
  EXPECT_THROW(validate(p), Error);
  p = {};
  p.reset_value = 0.1;
  EXPECT_THROW(validate(p), Error);
}

// ---- kernels against brute-force connectivity ------------------------------------------

namespace {

std::vector<double> brute_forward(const LayerSpec& l, const std::vector<double>& in) {
  const auto syn = testkit::connections(l);
  std::vector<double> out(syn.size(), 0.0);
  for (std::size_t o = 0; o < syn.size(); ++o)
    for (const auto& s : syn[o]) out[o] += s.weight * in[s.in];
  return out;
}

}  // namespace

TEST(Kernels, ForwardAdjointAndWeightGradMatchExplicitConnections) {
  Rng rng = named_rng(5, "kernels");
  const std::vector<LayerGeometry> shapes{make_conv({3, 6, 5}, 4, 3, 1, 1), make_conv({2, 7, 7}, 3, 3, 0, 2),
                                          make_conv({1, 5, 5}, 2, 5, 2, 1), make_avg_pool({2, 7, 5}, 2),
                                          make_avg_pool({1, 9, 9}, 4), make_dense({2, 3, 3}, 5)};
  for (const auto& g : shapes) {
    LayerSpec l;
    l.geometry = g;
    for (std::size_t i = 0; i < g.weight_count(); ++i) l.weights.push_back(uniform_real(rng, -1, 1));
    l.bias.assign(g.bias_count(), 0.0);
    const LayerKernel<double> k(g, l.weights, l.pool_weight());

    std::vector<double> in(g.in.size());
    for (double& v : in) v = uniform01(rng) < 0.5 ? uniform_real(rng, -1, 1) : 0.0;
    std::vector<double> out(g.out.size());
    k.forward<double, double>(in, out);
    const auto ref = brute_forward(l, in);
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], ref[i], 1e-12) << to_string(g.kind);

    // <W in, e> == <in, W^T e>
    std::vector<double> e(g.out.size()), back(g.in.size());
    for (double& v : e) v = uniform_real(rng, -1, 1);
    k.adjoint<double, double>(e, {}, back);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < e.size(); ++i) lhs += out[i] * e[i];
    for (std::size_t i = 0; i < in.size(); ++i) rhs += in[i] * back[i];
    EXPECT_NEAR(lhs, rhs, 1e-10);

    if (l.learnable()) {
      std::vector<double> gim(g.weight_count(), 0.0);
      k.accumulate_weight_grad<double, double>(in, e, gim);
      const auto grad = k.to_canonical(gim);
      std::vector<double> expected(g.weight_count(), 0.0);
      const auto syn = testkit::connections(l);
      for (std::size_t o = 0; o < syn.size(); ++o)
        for (const auto& s : syn[o]) expected[static_cast<std::size_t>(s.weight_index)] += e[o] * in[s.in];
      for (std::size_t i = 0; i < grad.size(); ++i) ASSERT_NEAR(grad[i], expected[i], 1e-12);
    }
  }
}

TEST(Kernels, IntegerKernelSumsExactly) {
  const LayerGeometry g = make_conv({2, 4, 4}, 2, 3, 1, 1);
  std::vector<std::int64_t> w(g.weight_count());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<std::int64_t>(i % 7) - 3;
  const LayerKernel<std::int64_t> k(g, w, 0);
  std::vector<std::uint8_t> in(g.in.size(), 1);
  std::vector<std::int64_t> out(g.out.size());
  k.forward<std::int64_t, std::uint8_t>(in, out);
  // Centre neuron of channel 0 sees all 18 taps.
  std::int64_t full = 0;
  for (std::size_t i = 0; i < 18; ++i) full += w[i];
  EXPECT_EQ(out[1 * 4 + 1], full);
}

// ---- forward ---------------------------------------------------------------------------

TEST(Forward, ZeroFrameStaysSilent) {
  const NetworkSpec net = build_network(Variant::Win50, 1);
  const StateRecord rec = forward(net, SpikeFrame(50, 50), 5);
  for (const auto& tr : rec.layers) {
    for (double v : tr.u) ASSERT_EQ(v, 0.0);
    for (double v : tr.o) ASSERT_EQ(v, 0.0);
  }
}

TEST(Forward, SinglePixelThroughFirstPool) {
  NetworkSpec net = build_network(Variant::Win50, 1, {}, PoolingMode::Linear);
  SpikeFrame f(50, 50);
  f.bits[f.index(1, 9, 13)] = 1;
  const StateRecord rec = forward(net, f, 1);
  const auto x = rec.layers[0].x_at(0);
  const Shape3 out = net.layers[0].geometry.out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t target = (1 * out.height + 9 / 4) * out.width + 13 / 4;
    EXPECT_EQ(x[i], i == target ? 1.0 / 16.0 : 0.0);
  }
}

TEST(Forward, DeterministicAndShapedAsDocumented) {
  const NetworkSpec net = build_network(Variant::Win50, 2, {}, PoolingMode::Spiking, 2.0);
  Rng rng = named_rng(1, "frames");
  std::vector<SpikeFrame> frames{testkit::random_frame(rng, 50, 50, 0.3), testkit::random_frame(rng, 50, 50, 0.3)};
  const StateRecord a = forward(net, frames, 4), b = forward(net, frames, 4);
  EXPECT_EQ(a.timesteps, 8u);
  EXPECT_EQ(a.segments(), 2u);
  for (std::size_t n = 0; n < a.layers.size(); ++n) {
    EXPECT_EQ(a.layers[n].u, b.layers[n].u);
    EXPECT_EQ(a.layers[n].o, b.layers[n].o);
    EXPECT_EQ(a.layers[n].u.size(), net.layers[n].neurons() * 8);
  }
}

TEST(Forward, MatchesStepwiseLifRecursion) {
  Rng rng = named_rng(2, "lif");
  const NetworkSpec net = testkit::random_small_network(rng, 0, 3.0);
  const SpikeFrame f = testkit::random_frame(rng, 2, 2, 0.6);
  const StateRecord rec = forward(net, f, 5);
  const std::vector<double> in(f.bits.begin(), f.bits.end());
  // Independent recursion, one neuron at a time.
  std::vector<std::vector<double>> u(2), o(2);
  for (std::size_t n = 0; n < 2; ++n) {
    u[n].assign(net.layers[n].neurons(), 0.0);
    o[n].assign(net.layers[n].neurons(), 0.0);
  }
  for (std::uint32_t t = 0; t < 5; ++t)
    for (std::size_t n = 0; n < 2; ++n) {
      const auto& l = net.layers[n];
      const std::vector<double>& below = n == 0 ? in : o[0];
      std::vector<double> next_o(l.neurons());
      for (std::size_t i = 0; i < l.neurons(); ++i) {
        double x = l.bias[i];
        for (std::size_t j = 0; j < below.size(); ++j) x += l.weights[i * below.size() + j] * below[j];
        const LifOutput r = lif_step(u[n][i], o[n][i] != 0.0, x, 0.0, net.lif);
        u[n][i] = r.u;
        next_o[i] = r.spike;
        ASSERT_NEAR(rec.layers[n].u_at(t)[i], r.u, 1e-12);
        ASSERT_EQ(rec.layers[n].o_at(t)[i], next_o[i]);
      }
      o[n] = next_o;
    }
}

TEST(Forward, ShapeMismatchAndZeroRepeat) {
  const NetworkSpec net = build_network(Variant::Win50, 1);
  EXPECT_THROW(forward(net, SpikeFrame(40, 50), 1), Error);
  EXPECT_THROW(forward(net, SpikeFrame(50, 50), 0), Error);
}

// ---- predictions --------------------------------------------------------------------------

TEST(Predict, ArgmaxAndTieRules) {
  const std::uint32_t c1[] = {2, 7};
  const double u0[] = {0.0, 0.0};
  EXPECT_EQ((argmax_with_ties<std::uint32_t, double>(c1, u0)), kCar);
  const std::uint32_t c2[] = {0, 0};
  const double u2[] = {0.1, 0.3};
  EXPECT_EQ((argmax_with_ties<std::uint32_t, double>(c2, u2)), 1);
  const double u3[] = {0.2, 0.2};
  EXPECT_EQ((argmax_with_ties<std::uint32_t, double>(c2, u3)), 0);
}

TEST(Predict, FrameFromRecord) {
  // One input pixel, output neuron 1 strongly driven.
  const Shape3 in{2, 1, 1};
  NetworkSpec net = make_network(in, {make_dense(in, 2)});
  net.layers[0].weights = {0.0, 0.1, 0.0, 0.9};
  SpikeFrame f(1, 1);
  f.bits = {0, 1};
  EXPECT_EQ(predict_frame(forward(net, f, 5)), 1);
  // Silent output: decided by the final potential (0.1 accumulates).
  net.layers[0].weights = {0.0, 0.05, 0.0, 0.02};
  EXPECT_EQ(predict_frame(forward(net, f, 5)), 0);
  Simulator sim(net);
  EXPECT_EQ(classify_frame(sim, f, 5), 0);
}

TEST(Predict, StreamMajorityVote) {
  const std::vector<int> six_four{1, 1, 0, 1, 0, 1, 0, 1, 1, 0};
  EXPECT_EQ(predict_stream(six_four), kCar);
  EXPECT_EQ(predict_stream(std::vector<int>{1}), kCar);
  const std::vector<int> tie{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  EXPECT_EQ(predict_stream(tie), kBackground);
  EXPECT_THROW(predict_stream(std::vector<int>{}), Error);
}

TEST(Predict, ExhaustiveTenFrameVotes) {
  for (unsigned mask = 0; mask < 1024; ++mask) {
    std::vector<int> v(10);
    int cars = 0;
    for (int k = 0; k < 10; ++k) cars += v[k] = (mask >> k) & 1;
    const int expected = cars > 5 ? 1 : cars < 5 ? 0 : v.back();
    ASSERT_EQ(predict_stream(v), expected) << mask;
  }
}
