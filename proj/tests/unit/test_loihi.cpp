#include <gtest/gtest.h>

#include <chrono>
#include <map>
#include <set>

#include "carsnn/carsnn.hpp"
#include "support/checks.hpp"

using namespace carsnn;

namespace {

NetworkSpec zero_bias(NetworkSpec net) {
  for (auto& l : net.layers) std::fill(l.bias.begin(), l.bias.end(), 0.0);
  return net;
}

QuantizedNetwork tiny_quantized(std::int32_t weight, int wgt_exp = 0) {
  const Shape3 in{2, 1, 1};
  QuantizedNetwork q;
  q.input = in;
  q.vth_mant = 10;
  q.delta_v = 3276;
  q.delta_i = kDecayOne;
  QuantizedLayer l;
  l.geometry = make_dense(in, 2);
  l.weights = {0, 0, 0, weight};
  l.wgt_exp = wgt_exp;
  q.layers.push_back(l);
  return q;
}

QuantizeOptions fixed_exponent() {
  QuantizeOptions opt;
  opt.wgt_exp_policy = WgtExpPolicy::Fixed;
  return opt;
}

}  // namespace

// ---- parameter translation ----------------------------------------------------------

TEST(Quantize, ThresholdAndDecayFromDefaults) {
  const QuantizedNetwork q = quantize(build_network(Variant::Win50, 1));
  EXPECT_EQ(q.vth_mant, 10);
  EXPECT_EQ(q.delta_v, 3276);
  EXPECT_EQ(q.delta_i, 4096);
  EXPECT_EQ(q.bias, 0);
  EXPECT_EQ(q.threshold(), 640);
  EXPECT_DOUBLE_EQ(q.scale, 25.0);
}

TEST(Quantize, DecayIsTheLargestNotFasterThanTau) {
  for (double tau : {0.2, 0.1, 0.25, 0.5, 0.3333, 0.9}) {
    const std::int32_t d = delta_v_for(tau);
    EXPECT_GE((kDecayOne - d) / double(kDecayOne), tau - 1e-12) << tau;
    EXPECT_LT((kDecayOne - d - 1) / double(kDecayOne), tau) << tau;
  }
}

TEST(Quantize, SingleWeight) {
  const Shape3 in{2, 1, 1};
  NetworkSpec net = make_network(in, {make_dense(in, 2)});
  net.layers[0].weights = {0.2, 0.1, 0.0, 0.3};
  const QuantizedNetwork q = quantize(net, fixed_exponent());
  EXPECT_EQ(q.layers[0].weights[0], 5);
  EXPECT_EQ(q.layers[0].encoding, (EncodingRange{-255, 255, 1}));
  // The default exponent policy stores 160 * 2^-5: the same integer 5 on the chip.
  const QuantizedNetwork p = quantize(net);
  EXPECT_EQ(p.layers[0].wgt_exp, -5);
  EXPECT_EQ(p.layers[0].weights[0], 160);
  EXPECT_EQ(std::ldexp(p.layers[0].weights[0], p.layers[0].wgt_exp), 5.0);
}

TEST(Quantize, MixedSignsUseEvenMantissas) {
  const Shape3 in{2, 1, 1};
  NetworkSpec net = make_network(in, {make_dense(in, 2)});
  net.layers[0].weights = {0.2, -0.1, 6.0, -7.0};
  const QuantizedNetwork q = quantize(net, fixed_exponent());
  EXPECT_EQ(q.layers[0].encoding, (EncodingRange{-255, 254, 2}));
  EXPECT_EQ(q.layers[0].weights, (std::vector<std::int32_t>{6, -2, 150, -176}));
  for (auto m : q.layers[0].weights) EXPECT_EQ(m % 2, 0);
  // Error never exceeds half a grid step.
  EXPECT_LE(q.stats[0].max_abs_error, 2.0 / (2 * 25.0) + 1e-12);
}

TEST(Quantize, PoolingTapsUnderTheFixedExponent) {
  const QuantizedNetwork q = quantize(build_network(Variant::Win50, 1), fixed_exponent());
  EXPECT_EQ(q.layers[0].pool_weight, 2);  // 25 / 16 = 1.5625
  EXPECT_EQ(q.layers[2].pool_weight, 6);  // 25 / 4 = 6.25
  EXPECT_EQ(q.layers[4].pool_weight, 6);
  for (const auto& l : q.layers) EXPECT_EQ(l.wgt_exp, 0);
}

TEST(Quantize, PerLayerExponentIsTheDefaultAndUsesTheFullRange) {
  EXPECT_EQ(QuantizeOptions{}.wgt_exp_policy, WgtExpPolicy::PerLayer);
  const QuantizedNetwork q = quantize(build_network(Variant::Win50, 1));
  EXPECT_EQ(q.layers[0].wgt_exp, -6);
  EXPECT_EQ(q.layers[0].pool_weight, 100);  // 1.5625 * 64
  for (std::size_t n = 0; n < q.layers.size(); ++n) {
    const auto& st = q.stats[n];
    EXPECT_GE(st.min_mantissa, q.layers[n].encoding.lo);
    EXPECT_LE(st.max_mantissa, q.layers[n].encoding.hi);
    // One more bit of exponent would not fit (or the exponent is minimal).
    if (q.layers[n].wgt_exp > kMinWgtExp) {
      EXPECT_GT(std::max(std::abs(st.min_mantissa), std::abs(st.max_mantissa)), 127) << n;
    }
  }
}

TEST(Quantize, DequantizedErrorIsHalfAGridStep) {
  Rng rng = named_rng(3, "q");
  for (int trial = 0; trial < 20; ++trial) {
    NetworkSpec net = zero_bias(testkit::random_small_network(rng, trial % 4, 2.0));
    for (auto enc : {WeightEncoding::Auto, WeightEncoding::Step1})
      for (auto pol : {WgtExpPolicy::Fixed, WgtExpPolicy::PerLayer}) {
        QuantizeOptions opt;
        opt.encoding = enc;
        opt.wgt_exp_policy = pol;
        const QuantizedNetwork q = quantize(net, opt);
        const NetworkSpec back = dequantize(q);
        for (std::size_t n = 0; n < net.layers.size(); ++n) {
          const double half = q.layers[n].encoding.step * std::ldexp(1.0, q.layers[n].wgt_exp) / (2 * q.scale);
          for (std::size_t i = 0; i < net.layers[n].weights.size(); ++i)
            ASSERT_LE(std::abs(back.layers[n].weights[i] - net.layers[n].weights[i]), half + 1e-12);
        }
      }
  }
}

TEST(Quantize, OverflowNamesTheLayer) {
  const Shape3 in{2, 1, 1};
  NetworkSpec net = make_network(in, {make_dense(in, 2)});
  net.layers[0].weights = {11.0, 0.0, 0.0, 0.0};  // 275 > 255
  try {
    quantize(net, fixed_exponent());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WeightOverflow);
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
  EXPECT_EQ(quantize(net).layers[0].wgt_exp, 1);
}

TEST(Quantize, RejectsBiasAndLinearPooling) {
  NetworkSpec net = build_network(Variant::Win50, 1);
  net.layers[1].bias[0] = 0.1;
  EXPECT_THROW(quantize(net), Error);
  EXPECT_THROW(quantize(build_network(Variant::Win50, 1, {}, PoolingMode::Linear)), Error);
}

TEST(Quantize, OptionParsers) {
  EXPECT_EQ(parse_weight_encoding("step1"), WeightEncoding::Step1);
  EXPECT_EQ(parse_wgt_exp_policy("per-layer"), WgtExpPolicy::PerLayer);
  EXPECT_EQ(parse_decay_rounding("floor"), DecayRounding::Floor);
  EXPECT_THROW(parse_decay_rounding("nearest"), Error);
}

// ---- integer dynamics ----------------------------------------------------------------

TEST(Cuba, DecayOfAQuietNeuron) {
  const QuantizedNetwork q = tiny_quantized(0);
  CubaState st(1);
  st.comp_v[0] = 1000;
  const std::int64_t sum[] = {0};
  std::uint8_t spike[1];
  cuba_update(st, q, 0, sum, spike);
  EXPECT_EQ(st.comp_v[0], 200);  // floor(1000 * 820 / 4096)
  EXPECT_EQ(spike[0], 0);
}

TEST(Cuba, ThresholdCrossingResets) {
  const QuantizedNetwork q = tiny_quantized(10);
  CubaNetwork chip(q);
  chip.step(std::vector<std::uint8_t>{0, 1});
  EXPECT_EQ(chip.state(0).comp_i[1], 640);
  EXPECT_EQ(chip.spikes(0)[1], 1);
  EXPECT_EQ(chip.state(0).comp_v[1], 0);
  EXPECT_EQ(chip.spikes(0)[0], 0);
}

TEST(Cuba, FullCurrentDecayForgets) {
  const QuantizedNetwork q = tiny_quantized(3);
  CubaNetwork chip(q);
  chip.step(std::vector<std::uint8_t>{0, 1});
  EXPECT_EQ(chip.state(0).comp_i[1], 192);
  chip.step(std::vector<std::uint8_t>{0, 0});
  EXPECT_EQ(chip.state(0).comp_i[1], 0);
}

TEST(Cuba, RoundingModesDifferOnlyForNegativeValues) {
  EXPECT_EQ(decay(1000, 3276, DecayRounding::TowardZero), 200);
  EXPECT_EQ(decay(1000, 3276, DecayRounding::Floor), 200);
  EXPECT_EQ(decay(-1000, 3276, DecayRounding::TowardZero), -200);
  EXPECT_EQ(decay(-1000, 3276, DecayRounding::Floor), -201);
  EXPECT_EQ(decay(-4096, 3276, DecayRounding::Floor), -820);
}

TEST(Cuba, WeightExponentScalesTheCurrent) {
  const QuantizedNetwork q = tiny_quantized(5, 2);
  CubaNetwork chip(q);
  chip.step(std::vector<std::uint8_t>{0, 1});
  EXPECT_EQ(chip.state(0).comp_i[1], 5 * 256);
}

TEST(Cuba, BitExactAgainstRationalOracle) {
  std::uint64_t spikes = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const auto c = testkit::cuba_case(77, i, 30);
    EXPECT_EQ(c.state_mismatches, 0u) << "case " << i;
    spikes += c.spikes;
  }
  EXPECT_GT(spikes, 0u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(testkit::cuba_mismatches_with_current_decay(78, i, 100), 0u);
}

TEST(Cuba, OracleDetectsAWrongRoundingMode) {
  // Negative control: flipping the oracle's rounding must produce
  // differences once potentials go negative.
  Rng rng = named_rng(9, "neg");
  NetworkSpec net;
  QuantizedNetwork q = testkit::random_quantized(rng, net, false);
  q.rounding = DecayRounding::TowardZero;
  QuantizedNetwork flipped = q;
  flipped.rounding = DecayRounding::Floor;
  CubaNetwork chip(q);
  testkit::RationalNetwork ref(flipped);
  std::uint64_t diffs = 0;
  for (int t = 0; t < 200; ++t) {
    const SpikeFrame f = testkit::random_frame(rng, q.input.height, q.input.width, 0.5);
    chip.step(f.bits);
    ref.step(f.bits);
    for (std::size_t n = 0; n < q.layers.size(); ++n)
      for (std::size_t k = 0; k < q.layers[n].neurons(); ++k) diffs += chip.state(n).comp_v[k] != ref.v[n][k];
  }
  EXPECT_GT(diffs, 0u);
}

// ---- inference protocol ----------------------------------------------------------------------

TEST(Emulate, SeventeenTimestepsPerInference) {
  const QuantizedNetwork q = quantize(build_network(Variant::Win50, 1));
  const std::vector<SpikeFrame> frames(3, SpikeFrame(50, 50));
  const EmulationResult r = emulate_inference(q, frames, {10, 7}, true);
  EXPECT_EQ(r.timesteps_per_inference, 17u);
  EXPECT_EQ(r.timesteps, 51u);
  EXPECT_EQ(r.trace.size(), 51u);
}

TEST(Emulate, QuietInputFallsBackToTheTieRule) {
  const QuantizedNetwork q = quantize(build_network(Variant::Win50, 1));
  const std::vector<SpikeFrame> frames(2, SpikeFrame(50, 50));
  const EmulationResult r = emulate_inference(q, frames);
  EXPECT_EQ(r.class_id, 0);
  for (const auto& c : r.output_counts) EXPECT_EQ(c, (std::array<std::uint32_t, 2>{0, 0}));
}

TEST(Emulate, DrivenNeuronWins) {
  const QuantizedNetwork q = tiny_quantized(10);
  SpikeFrame f(1, 1);
  f.bits = {0, 1};
  const EmulationResult r = emulate_inference(q, std::vector<SpikeFrame>{f}, {10, 7});
  EXPECT_EQ(r.class_id, 1);
  EXPECT_EQ(r.output_counts[0][1], 10u);  // fires on every driven step
}

TEST(Emulate, InvalidProtocolAndShapes) {
  const QuantizedNetwork q = tiny_quantized(10);
  EXPECT_THROW(emulate_inference(q, std::vector<SpikeFrame>{SpikeFrame(1, 1)}, {0, 7}), Error);
  EXPECT_THROW(emulate_inference(q, std::vector<SpikeFrame>{SpikeFrame(2, 1)}), Error);
  EXPECT_THROW(emulate_inference(q, std::vector<SpikeFrame>{}), Error);
}

TEST(Emulate, SplitAccuracyIsThreadInvariant) {
  SyntheticSpec spec;
  spec.n_per_class = 4;
  spec.n_test_per_class = 4;
  spec.event_rate = 600;
  const Dataset d = gen_synthetic(spec);
  const QuantizedNetwork q = quantize(build_network(Variant::Win50, 2, {}, PoolingMode::Spiking, 2.0));
  TrainConfig a, b;
  b.threads = 3;
  const auto sa = emulate_split(q, d.test, a, {}, kTestSplit), sb = emulate_split(q, d.test, b, {}, kTestSplit);
  EXPECT_EQ(sa.frames_correct, sb.frames_correct);
  EXPECT_EQ(sa.streams_correct, sb.streams_correct);
  EXPECT_EQ(sa.streams, 8u);
}

// ---- float / integer equivalence ---------------------------------------------------------------

TEST(Equivalence, RandomNetworksAgreeOutsideTheBoundary) {
  for (std::size_t i = 0; i < 6; ++i) {
    const auto c = testkit::cuba_case(55, i, 40);
    const auto& e = c.equivalence;
    EXPECT_TRUE(e.equivalent) << "case " << i;
    EXPECT_EQ(e.mismatches_outside_boundary, 0u);
    EXPECT_EQ(e.bound_violations, 0u);
    EXPECT_EQ(e.agreement_outside_boundary, 1.0);
    EXPECT_LT(e.boundary, e.neuron_steps / 5);  // the exemption stays small
  }
}

TEST(Equivalence, WrongVoltageDecayIsReported) {
  Rng rng = named_rng(4, "eq");
  NetworkSpec net = zero_bias(testkit::random_small_network(rng, 0, 3.0));
  QuantizeOptions opt;
  opt.delta_v = 1000;  // far from tau = 0.2
  const QuantizedNetwork q = quantize(net, opt);
  std::vector<SpikeFrame> frames;
  for (int k = 0; k < 40; ++k) frames.push_back(testkit::random_frame(rng, 2, 2, 0.3));
  const EquivalenceReport r = equivalence_check(net, q, frames);
  EXPECT_FALSE(r.equivalent);
  EXPECT_GT(r.bound_violations + r.mismatches_outside_boundary, 0u);
}

TEST(Equivalence, QuietInputIsTriviallyIdentical) {
  const NetworkSpec net = build_network(Variant::Win50, 1);
  const QuantizedNetwork q = quantize(net);
  const std::vector<SpikeFrame> frames(3, SpikeFrame(50, 50));
  const EquivalenceReport r = equivalence_check(net, q, frames);
  EXPECT_TRUE(r.equivalent);
  EXPECT_EQ(r.boundary, 0u);
  EXPECT_EQ(r.free_running_spike_agreement, 1.0);
  EXPECT_EQ(r.free_running_prediction_agreement, 1.0);
}

TEST(Equivalence, StructureMustMatch) {
  const NetworkSpec net = build_network(Variant::Win50, 1);
  const QuantizedNetwork q = quantize(build_network(Variant::Win100, 1));
  EXPECT_THROW(equivalence_check(net, q, std::vector<SpikeFrame>{SpikeFrame(50, 50)}), Error);
}

// ---- resource mapping ----------------------------------------------------------------------------

TEST(Mapping, FullSizeTotals) {
  const auto start = std::chrono::steady_clock::now();
  const MappingReport r = map_resources(quantize(build_network(Variant::Full128, 1)));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(r.total_compartments, 54'274u);
  EXPECT_EQ(r.total_synapses, 5'122'048u);
  EXPECT_TRUE(r.feasible);
  EXPECT_TRUE(r.violations.empty());
  EXPECT_GE(r.cores_used, r.lower_bound_cores);
  EXPECT_LT(seconds, 1.0);
}

TEST(Mapping, PerLayerTotals) {
  const MappingReport r = map_resources(quantize(build_network(Variant::Full128, 1)));
  const std::vector<std::uint64_t> comps{2048, 32768, 8192, 8192, 2048, 1024, 2};
  const std::vector<std::uint64_t> syns{2048 * 16, 32768 * 18, 8192 * 4, 8192 * 288, 2048 * 4, 1024 * 2048, 2 * 1024};
  ASSERT_EQ(r.layers.size(), 7u);
  for (std::size_t n = 0; n < 7; ++n) {
    EXPECT_EQ(r.layers[n].compartments, comps[n]) << n;
    EXPECT_EQ(r.layers[n].synapses, syns[n]) << n;
  }
}

namespace {

/// Recounts fan-in and fan-out of every core from explicit connection
/// lists, using only the (layer, first neuron, count) placement.
void recount(const std::vector<LayerGeometry>& layers, const MappingReport& r) {
  const std::size_t L = layers.size();
  std::vector<std::vector<std::size_t>> core_of(L);
  for (std::size_t n = 0; n < L; ++n) core_of[n].assign(layers[n].out.size(), ~std::size_t{0});
  auto index_of = [](const Shape3& s, std::size_t k) { return (k % s.channels) * s.height * s.width + k / s.channels; };
  for (std::size_t c = 0; c < r.cores.size(); ++c) {
    const auto& core = r.cores[c];
    for (std::size_t k = core.first_neuron; k < core.first_neuron + core.compartments; ++k)
      core_of[core.layer][index_of(layers[core.layer].out, k)] = c;
  }
  std::vector<std::vector<std::vector<testkit::Synapse>>> conn(L);
  for (std::size_t n = 0; n < L; ++n) {
    LayerSpec l;
    l.geometry = layers[n];
    l.weights.assign(layers[n].weight_count(), 0.0);
    conn[n] = testkit::connections(l);
    for (std::size_t j = 0; j < conn[n].size(); ++j) ASSERT_NE(core_of[n][j], ~std::size_t{0}) << "unplaced neuron";
  }
  std::map<std::size_t, std::set<std::size_t>> inputs;
  std::map<std::size_t, std::uint64_t> fan_out;
  for (std::size_t n = 0; n < L; ++n) {
    for (std::size_t j = 0; j < conn[n].size(); ++j)
      for (const auto& s : conn[n][j]) inputs[core_of[n][j]].insert(s.in);
    if (n + 1 < L) {
      std::vector<std::set<std::size_t>> dest(layers[n].out.size());
      for (std::size_t j = 0; j < conn[n + 1].size(); ++j)
        for (const auto& s : conn[n + 1][j]) dest[s.in].insert(core_of[n + 1][j]);
      for (std::size_t i = 0; i < dest.size(); ++i) fan_out[core_of[n][i]] += dest[i].size();
    }
  }
  for (std::size_t c = 0; c < r.cores.size(); ++c) {
    EXPECT_EQ(r.cores[c].fan_in, inputs[c].size()) << "core " << c;
    EXPECT_EQ(r.cores[c].fan_out, fan_out[c]) << "core " << c;
  }
}

}  // namespace

TEST(Mapping, CoreCountsMatchAnIndependentRecount) {
  std::vector<LayerGeometry> g;
  g.push_back(make_avg_pool({2, 13, 11}, 2));
  g.push_back(make_conv(g.back().out, 4, 3, 1, 1));
  g.push_back(make_avg_pool(g.back().out, 2));
  g.push_back(make_dense(g.back().out, 9));
  g.push_back(make_dense(g.back().out, 2));
  ChipConstraints tight;
  tight.max_compartments_per_core = 37;
  tight.max_fanin_per_core = 120;
  tight.max_fanout_per_core = 90;
  tight.synaptic_mem_per_core = 1500;
  const MappingReport r = map_layers(g, tight);
  EXPECT_TRUE(r.feasible);
  EXPECT_TRUE(check_mapping(r, tight).empty());
  std::uint64_t comps = 0;
  for (const auto& c : r.cores) comps += c.compartments;
  EXPECT_EQ(comps, r.total_compartments);
  EXPECT_GT(r.cores_used, r.lower_bound_cores);  // the tight limits bite
  recount(g, r);
  recount(g, map_layers(g));
}

TEST(Mapping, SingleNeuronOverLimitIsInfeasible) {
  ChipConstraints limits;
  limits.max_fanin_per_core = 100;
  try {
    map_layers({make_dense({2, 8, 8}, 2)}, limits);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Infeasible);
  }
}

TEST(Mapping, CheckMappingFlagsViolations) {
  MappingReport r;
  CoreUsage c;
  c.compartments = 2000;
  c.fan_in = 5000;
  r.cores.push_back(c);
  EXPECT_EQ(check_mapping(r, ChipConstraints{}).size(), 2u);
  ChipConstraints bad;
  bad.bytes_per_synapse = 0;
  EXPECT_THROW(map_layers({make_dense({2, 1, 1}, 2)}, bad), Error);
}
