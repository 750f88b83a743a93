#include <gtest/gtest.h>

#include <filesystem>
#include <unistd.h>

#include "carsnn/carsnn.hpp"
#include "json.hpp"

using namespace carsnn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("carsnn-ser-" + std::to_string(::getpid()) + "-" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

NetworkSpec trained_looking(std::uint64_t seed) {
  NetworkSpec net = build_network(Variant::Win50, seed);
  Rng rng = named_rng(seed, "bias");
  for (auto& l : net.layers)
    for (auto& b : l.bias) b = uniform_real(rng, -0.1, 0.1);
  return net;
}

}  // namespace

TEST(SerializeNetwork, RoundTripIsBitExact) {
  TempDir dir;
  const NetworkSpec net = trained_looking(4);
  save_network(net, dir.path / "model.json");
  EXPECT_TRUE(fs::exists(dir.path / "model.weights.bin"));
  EXPECT_EQ(load_network(dir.path / "model.json"), net);
}

TEST(SerializeNetwork, SidecarSizeAndHeader) {
  const NetworkSpec net = trained_looking(1);
  EXPECT_EQ(network_parameters_blob(net).size(), net.parameter_count() * 8);
  const auto j = network_to_json(net, "x.bin");
  EXPECT_EQ(j.at("format"), "carsnn-network");
  EXPECT_EQ(j.at("parameters").at("count").get<std::size_t>(), net.parameter_count());
  EXPECT_EQ(j.at("layers").size(), net.layers.size());
}

TEST(SerializeNetwork, RejectsWrongVersionFormatAndSize) {
  const NetworkSpec net = trained_looking(2);
  const auto blob = network_parameters_blob(net);
  auto j = network_to_json(net, "x.bin");
  auto code_of = [&](const nlohmann::json& doc, std::span<const std::uint8_t> b) {
    try {
      network_from_json(doc, b);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  auto v = j;
  v["version"] = 99;
  EXPECT_EQ(code_of(v, blob), ErrorCode::InvalidConfig);
  auto f = j;
  f["format"] = "something-else";
  EXPECT_EQ(code_of(f, blob), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of(j, std::span(blob).first(blob.size() - 8)), ErrorCode::ShapeMismatch);
  auto m = j;
  m.erase("lif");
  EXPECT_EQ(code_of(m, blob), ErrorCode::InvalidConfig);
}

TEST(SerializeNetwork, MissingSidecarIsAnIoError) {
  TempDir dir;
  save_network(trained_looking(3), dir.path / "m.json");
  fs::remove(dir.path / "m.weights.bin");
  try {
    load_network(dir.path / "m.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(SerializeQuantized, RoundTripForBothPolicies) {
  TempDir dir;
  for (auto pol : {WgtExpPolicy::Fixed, WgtExpPolicy::PerLayer}) {
    QuantizeOptions opt;
    opt.wgt_exp_policy = pol;
    const QuantizedNetwork q = quantize(build_network(Variant::Win50, 6), opt);
    save_quantized(q, dir.path / "q.json");
    EXPECT_EQ(load_quantized(dir.path / "q.json"), q);
  }
}

TEST(SerializeQuantized, WrongFormatIsRejected) {
  const QuantizedNetwork q = quantize(build_network(Variant::Win50, 6));
  auto j = quantized_to_json(q, "q.bin");
  j["format"] = "carsnn-network";
  EXPECT_THROW(quantized_from_json(j, quantized_weights_blob(q)), Error);
}

TEST(SerializeAdam, BytesRoundTrip) {
  const NetworkSpec net = trained_looking(5);
  AdamState s = AdamState::for_network(net);
  GradientSet g = GradientSet::zeros_like(net);
  for (auto& w : g.weights) std::fill(w.begin(), w.end(), 0.25);
  NetworkSpec copy = net;
  adam_step(copy, g, s, 1e-3);
  adam_step(copy, g, s, 1e-3);
  EXPECT_EQ(adam_from_bytes(adam_to_bytes(s)), s);
}

TEST(SerializeAdam, CorruptionIsDetected) {
  const AdamState s = AdamState::for_network(trained_looking(5));
  auto bytes = adam_to_bytes(s);
  auto code_of = [](std::vector<std::uint8_t> b) {
    try {
      adam_from_bytes(b);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(code_of(magic), ErrorCode::MalformedHeader);
  auto version = bytes;
  version[8] = 7;
  EXPECT_EQ(code_of(version), ErrorCode::MalformedHeader);
  EXPECT_EQ(code_of({bytes.begin(), bytes.end() - 1}), ErrorCode::TruncatedRecord);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(code_of(trailing), ErrorCode::MalformedHeader);
}

TEST(SerializeCheckpoint, SaveAndLoad) {
  TempDir dir;
  const NetworkSpec net = trained_looking(8);
  AdamState s = AdamState::for_network(net);
  s.step = 17;
  const Checkpoint c = save_checkpoint(dir.path / "ck", 3, net, s);
  EXPECT_EQ(c.network.filename(), "checkpoint-e0003.json");
  EXPECT_TRUE(fs::exists(dir.path / "ck" / "checkpoint-e0003.weights.bin"));
  const LoadedCheckpoint back = load_checkpoint(c.network);
  EXPECT_EQ(back.epoch, 3u);
  EXPECT_EQ(back.network, net);
  EXPECT_EQ(back.adam, s);
  // A plain network file is not a checkpoint.
  save_network(net, dir.path / "plain.json");
  EXPECT_THROW(load_checkpoint(dir.path / "plain.json"), Error);
}

TEST(SerializeCheckpoint, MetricsLineIsOneJsonObject) {
  EpochMetrics m;
  m.epoch = 2;
  m.lr = 1e-3;
  m.loss = 0.125;
  m.acc_s = 0.5;
  m.acc_test = 0.75;
  m.acc_train = 1.0;
  const std::string line = metrics_line(m);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.at("epoch"), 2);
  EXPECT_DOUBLE_EQ(j.at("acc_test").get<double>(), 0.75);
}
