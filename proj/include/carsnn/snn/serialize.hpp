#pragma once

// Network files are a JSON document describing the layer stack plus a
// binary sidecar holding every weight and bias as little-endian float64,
// layer by layer (weights first, then biases). The JSON records each
// block's element offset so readers never infer the layout.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "carsnn/core/binary_io.hpp"
#include "carsnn/core/error.hpp"
#include "carsnn/snn/network.hpp"

namespace carsnn {

inline constexpr int kNetworkFormatVersion = 1;
inline constexpr const char* kNetworkFormat = "carsnn-network";

/// "model.json" -> "model<suffix>", in the same directory.
inline std::filesystem::path sidecar_path(const std::filesystem::path& json_path, const std::string& suffix) {
  auto p = json_path;
  p.replace_extension();
  return p.string() + suffix;
}

inline nlohmann::json shape_to_json(const Shape3& s) {
  return {{"channels", s.channels}, {"height", s.height}, {"width", s.width}};
}

inline Shape3 shape_from_json(const nlohmann::json& j) {
  return {j.at("channels").get<std::uint32_t>(), j.at("height").get<std::uint32_t>(),
          j.at("width").get<std::uint32_t>()};
}

inline nlohmann::json geometry_to_json(const LayerGeometry& g) {
  return {{"kind", std::string(to_string(g.kind))},
          {"in", shape_to_json(g.in)},
          {"out", shape_to_json(g.out)},
          {"kernel", g.kernel},
          {"padding", g.padding},
          {"stride", g.stride}};
}

inline LayerGeometry geometry_from_json(const nlohmann::json& j) {
  LayerGeometry g;
  g.kind = parse_layer_kind(j.at("kind").get<std::string>());
  g.in = shape_from_json(j.at("in"));
  g.out = shape_from_json(j.at("out"));
  g.kernel = j.at("kernel").get<std::uint32_t>();
  g.padding = j.at("padding").get<std::uint32_t>();
  g.stride = j.at("stride").get<std::uint32_t>();
  return g;
}

inline nlohmann::json lif_to_json(const LifParams& p) {
  return {{"v_th", p.v_th}, {"tau", p.tau}, {"a1", p.a1}, {"reset_value", p.reset_value}};
}

inline LifParams lif_from_json(const nlohmann::json& j) {
  return {j.at("v_th").get<double>(), j.at("tau").get<double>(), j.at("a1").get<double>(),
          j.value("reset_value", 0.0)};
}

/// JSON header for `net`; `sidecar_name` is stored verbatim so the pair can
/// be moved together.
inline nlohmann::json network_to_json(const NetworkSpec& net, const std::string& sidecar_name) {
  nlohmann::json layers = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& l : net.layers) {
    auto j = geometry_to_json(l.geometry);
    j["weight_offset"] = offset;
    j["weight_count"] = l.weights.size();
    offset += l.weights.size();
    j["bias_offset"] = offset;
    j["bias_count"] = l.bias.size();
    offset += l.bias.size();
    layers.push_back(std::move(j));
  }
  return {{"format", kNetworkFormat},
          {"version", kNetworkFormatVersion},
          {"variant", std::string(to_string(net.variant))},
          {"input", shape_to_json(net.input)},
          {"pooling", std::string(to_string(net.pooling))},
          {"lif", lif_to_json(net.lif)},
          {"layers", std::move(layers)},
          {"parameters", {{"file", sidecar_name}, {"dtype", "float64-le"}, {"count", offset}}}};
}

inline std::vector<std::uint8_t> network_parameters_blob(const NetworkSpec& net) {
  std::vector<std::uint8_t> out;
  out.reserve(net.parameter_count() * 8);
  for (const auto& l : net.layers) {
    for (double w : l.weights) io::put_le(out, w);
    for (double b : l.bias) io::put_le(out, b);
  }
  return out;
}

inline NetworkSpec network_from_json(const nlohmann::json& j, std::span<const std::uint8_t> blob) {
  try {
    if (j.at("format").get<std::string>() != kNetworkFormat)
      fail(ErrorCode::InvalidConfig, "not a network file (format '" + j.at("format").get<std::string>() + "')");
    const int version = j.at("version").get<int>();
    if (version != kNetworkFormatVersion)
      fail(ErrorCode::InvalidConfig, "unsupported network format version " + std::to_string(version));
    NetworkSpec net;
    net.variant = parse_variant(j.at("variant").get<std::string>());
    net.input = shape_from_json(j.at("input"));
    net.pooling = parse_pooling(j.at("pooling").get<std::string>());
    net.lif = lif_from_json(j.at("lif"));
    const std::size_t count = j.at("parameters").at("count").get<std::size_t>();
    if (blob.size() != count * 8)
      fail(ErrorCode::ShapeMismatch, "parameter sidecar holds " + std::to_string(blob.size()) + " bytes, expected " +
                                         std::to_string(count * 8));
    auto read_block = [&](std::size_t offset, std::size_t n) {
      if (offset + n > count) fail(ErrorCode::ShapeMismatch, "parameter block exceeds the sidecar");
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = io::get_le<double>(blob, (offset + i) * 8);
      return v;
    };
    for (const auto& lj : j.at("layers")) {
      LayerSpec l;
      l.geometry = geometry_from_json(lj);
      l.weights = read_block(lj.at("weight_offset").get<std::size_t>(), lj.at("weight_count").get<std::size_t>());
      l.bias = read_block(lj.at("bias_offset").get<std::size_t>(), lj.at("bias_count").get<std::size_t>());
      net.layers.push_back(std::move(l));
    }
    validate(net);
    return net;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed network JSON: ") + e.what());
  }
}

inline void save_network(const NetworkSpec& net, const std::filesystem::path& json_path) {
  const auto side = sidecar_path(json_path, ".weights.bin");
  io::write_text(json_path, network_to_json(net, side.filename().string()).dump(2) + "\n");
  io::write_file(side, network_parameters_blob(net));
}

inline NetworkSpec load_network(const std::filesystem::path& json_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(json_path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, json_path.string() + ": " + e.what());
  }
  std::filesystem::path side;
  try {
    side = json_path.parent_path() / j.at("parameters").at("file").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, json_path.string() + ": " + e.what());
  }
  return network_from_json(j, io::read_file(side));
}

}  // namespace carsnn
