#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "carsnn/core/binary_io.hpp"
#include "carsnn/core/error.hpp"
#include "carsnn/snn/serialize.hpp"
#include "carsnn/stbp/adam.hpp"
#include "carsnn/stbp/train.hpp"

namespace carsnn {

inline constexpr char kAdamMagic[8] = {'C', 'S', 'N', 'N', 'A', 'D', 'A', 'M'};
inline constexpr std::uint32_t kAdamVersion = 1;

// Layout: magic, u32 version, u64 step, f64 beta1, beta2, epsilon, u32 layer
// count, then per layer: u64 n, n x f64 m, n x f64 v (weights), then the
// same for biases.
inline std::vector<std::uint8_t> adam_to_bytes(const AdamState& s) {
  std::vector<std::uint8_t> out(std::begin(kAdamMagic), std::end(kAdamMagic));
  io::put_le(out, kAdamVersion);
  io::put_le(out, s.step);
  io::put_le(out, s.beta1);
  io::put_le(out, s.beta2);
  io::put_le(out, s.epsilon);
  io::put_le(out, static_cast<std::uint32_t>(s.m_weights.size()));
  auto put_pair = [&](const std::vector<double>& m, const std::vector<double>& v) {
    io::put_le(out, static_cast<std::uint64_t>(m.size()));
    for (double x : m) io::put_le(out, x);
    for (double x : v) io::put_le(out, x);
  };
  for (std::size_t n = 0; n < s.m_weights.size(); ++n) {
    put_pair(s.m_weights[n], s.v_weights[n]);
    put_pair(s.m_bias[n], s.v_bias[n]);
  }
  return out;
}

inline AdamState adam_from_bytes(std::span<const std::uint8_t> b) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > b.size()) fail(ErrorCode::TruncatedRecord, "optimizer state ends early");
  };
  need(sizeof kAdamMagic);
  if (std::memcmp(b.data(), kAdamMagic, sizeof kAdamMagic) != 0)
    fail(ErrorCode::MalformedHeader, "not an optimizer state file");
  pos = sizeof kAdamMagic;
  auto get = [&]<class T>(T) {
    need(sizeof(T));
    const T v = io::get_le<T>(b, pos);
    pos += sizeof(T);
    return v;
  };
  if (get(std::uint32_t{}) != kAdamVersion) fail(ErrorCode::MalformedHeader, "unsupported optimizer state version");
  AdamState s;
  s.step = get(std::uint64_t{});
  s.beta1 = get(double{});
  s.beta2 = get(double{});
  s.epsilon = get(double{});
  const auto layers = get(std::uint32_t{});
  auto get_pair = [&](std::vector<double>& m, std::vector<double>& v) {
    const auto n = get(std::uint64_t{});
    need(n * 16);
    m.resize(n);
    v.resize(n);
    for (auto& x : m) x = get(double{});
    for (auto& x : v) x = get(double{});
  };
  s.m_weights.resize(layers);
  s.v_weights.resize(layers);
  s.m_bias.resize(layers);
  s.v_bias.resize(layers);
  for (std::uint32_t n = 0; n < layers; ++n) {
    get_pair(s.m_weights[n], s.v_weights[n]);
    get_pair(s.m_bias[n], s.v_bias[n]);
  }
  if (pos != b.size()) fail(ErrorCode::MalformedHeader, "trailing bytes after optimizer state");
  return s;
}

inline nlohmann::json epoch_to_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch}, {"lr", m.lr},         {"loss", m.loss},
          {"acc_s", m.acc_s}, {"acc_test", m.acc_test}, {"acc_train", m.acc_train}};
}

/// One line of the metrics log (JSON lines, no trailing newline).
inline std::string metrics_line(const EpochMetrics& m) { return epoch_to_json(m).dump(); }

struct Checkpoint {
  std::filesystem::path network;  // JSON header; weights sit next to it
  std::filesystem::path adam;
};

/// Writes `<dir>/checkpoint-eNNNN.json` (+ weights sidecar) and the
/// matching `.adam.bin`. The JSON also records the epoch for resuming.
inline Checkpoint save_checkpoint(const std::filesystem::path& dir, std::uint32_t epoch, const NetworkSpec& net,
                                  const AdamState& adam) {
  std::filesystem::create_directories(dir);
  char name[32];
  std::snprintf(name, sizeof name, "checkpoint-e%04u", epoch);
  Checkpoint c{dir / (std::string(name) + ".json"), dir / (std::string(name) + ".adam.bin")};
  auto j = network_to_json(net, std::string(name) + ".weights.bin");
  j["epoch"] = epoch;
  j["optimizer"] = c.adam.filename().string();
  io::write_text(c.network, j.dump(2) + "\n");
  io::write_file(dir / (std::string(name) + ".weights.bin"), network_parameters_blob(net));
  io::write_file(c.adam, adam_to_bytes(adam));
  return c;
}

struct LoadedCheckpoint {
  NetworkSpec network;
  AdamState adam;
  std::uint32_t epoch = 0;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& json_path) {
  LoadedCheckpoint out;
  out.network = load_network(json_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(json_path));
    out.epoch = j.at("epoch").get<std::uint32_t>();
    out.adam = adam_from_bytes(io::read_file(json_path.parent_path() / j.at("optimizer").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, json_path.string() + " is not a checkpoint: " + e.what());
  }
  if (out.adam.m_weights.size() != out.network.layers.size())
    fail(ErrorCode::ShapeMismatch, "optimizer state does not match the checkpoint network");
  return out;
}

}  // namespace carsnn
