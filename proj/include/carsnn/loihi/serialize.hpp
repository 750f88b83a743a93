#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "carsnn/core/binary_io.hpp"
#include "carsnn/core/error.hpp"
#include "carsnn/loihi/quantize.hpp"
#include "carsnn/snn/serialize.hpp"

namespace carsnn {

inline constexpr int kQuantizedFormatVersion = 1;
inline constexpr const char* kQuantizedFormat = "carsnn-quantized";

inline nlohmann::json quantized_to_json(const QuantizedNetwork& q, const std::string& sidecar_name) {
  nlohmann::json layers = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t n = 0; n < q.layers.size(); ++n) {
    const auto& l = q.layers[n];
    auto j = geometry_to_json(l.geometry);
    j["wgt_exp"] = l.wgt_exp;
    j["encoding"] = {{"lo", l.encoding.lo}, {"hi", l.encoding.hi}, {"step", l.encoding.step}};
    j["pool_weight"] = l.pool_weight;
    j["weight_offset"] = offset;
    j["weight_count"] = l.weights.size();
    offset += l.weights.size();
    if (n < q.stats.size()) {
      const auto& s = q.stats[n];
      j["stats"] = {{"count", s.count},
                    {"max_abs_error", s.max_abs_error},
                    {"mean_abs_error", s.mean_abs_error},
                    {"min_mantissa", s.min_mantissa},
                    {"max_mantissa", s.max_mantissa}};
    }
    layers.push_back(std::move(j));
  }
  return {{"format", kQuantizedFormat},
          {"version", kQuantizedFormatVersion},
          {"variant", std::string(to_string(q.variant))},
          {"input", shape_to_json(q.input)},
          {"scale", q.scale},
          {"vth_mant", q.vth_mant},
          {"delta_v", q.delta_v},
          {"delta_i", q.delta_i},
          {"bias", q.bias},
          {"rounding", std::string(to_string(q.rounding))},
          {"source_lif", lif_to_json(q.source_lif)},
          {"layers", std::move(layers)},
          {"weights", {{"file", sidecar_name}, {"dtype", "int32-le"}, {"count", offset}}}};
}

inline std::vector<std::uint8_t> quantized_weights_blob(const QuantizedNetwork& q) {
  std::vector<std::uint8_t> out;
  for (const auto& l : q.layers)
    for (auto w : l.weights) io::put_le(out, w);
  return out;
}

inline QuantizedNetwork quantized_from_json(const nlohmann::json& j, std::span<const std::uint8_t> blob) {
  try {
    if (j.at("format").get<std::string>() != kQuantizedFormat)
      fail(ErrorCode::InvalidConfig, "not a quantized network file");
    if (j.at("version").get<int>() != kQuantizedFormatVersion)
      fail(ErrorCode::InvalidConfig, "unsupported quantized format version");
    QuantizedNetwork q;
    q.variant = parse_variant(j.at("variant").get<std::string>());
    q.input = shape_from_json(j.at("input"));
    q.scale = j.at("scale").get<double>();
    q.vth_mant = j.at("vth_mant").get<std::int32_t>();
    q.delta_v = j.at("delta_v").get<std::int32_t>();
    q.delta_i = j.at("delta_i").get<std::int32_t>();
    q.bias = j.at("bias").get<std::int64_t>();
    q.rounding = parse_decay_rounding(j.at("rounding").get<std::string>());
    q.source_lif = lif_from_json(j.at("source_lif"));
    const std::size_t count = j.at("weights").at("count").get<std::size_t>();
    if (blob.size() != count * 4)
      fail(ErrorCode::ShapeMismatch, "weight sidecar holds " + std::to_string(blob.size()) + " bytes, expected " +
                                         std::to_string(count * 4));
    for (const auto& lj : j.at("layers")) {
      QuantizedLayer l;
      l.geometry = geometry_from_json(lj);
      l.wgt_exp = lj.at("wgt_exp").get<int>();
      l.encoding = {lj.at("encoding").at("lo").get<std::int32_t>(), lj.at("encoding").at("hi").get<std::int32_t>(),
                    lj.at("encoding").at("step").get<std::int32_t>()};
      l.pool_weight = lj.at("pool_weight").get<std::int32_t>();
      const auto off = lj.at("weight_offset").get<std::size_t>();
      const auto n = lj.at("weight_count").get<std::size_t>();
      if (off + n > count || n != l.geometry.weight_count())
        fail(ErrorCode::ShapeMismatch, "layer weight block does not match its geometry");
      for (std::size_t i = 0; i < n; ++i) l.weights.push_back(io::get_le<std::int32_t>(blob, (off + i) * 4));
      if (lj.contains("stats")) {
        const auto& s = lj.at("stats");
        q.stats.push_back({s.at("count").get<std::size_t>(), s.at("max_abs_error").get<double>(),
                           s.at("mean_abs_error").get<double>(), s.at("min_mantissa").get<std::int32_t>(),
                           s.at("max_mantissa").get<std::int32_t>()});
      }
      q.layers.push_back(std::move(l));
    }
    return q;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed quantized network JSON: ") + e.what());
  }
}

inline void save_quantized(const QuantizedNetwork& q, const std::filesystem::path& json_path) {
  const auto side = sidecar_path(json_path, ".weights.i32");
  io::write_text(json_path, quantized_to_json(q, side.filename().string()).dump(2) + "\n");
  io::write_file(side, quantized_weights_blob(q));
}

inline QuantizedNetwork load_quantized(const std::filesystem::path& json_path) {
  nlohmann::json j;
  std::filesystem::path side;
  try {
    j = nlohmann::json::parse(io::read_text(json_path));
    side = json_path.parent_path() / j.at("weights").at("file").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, json_path.string() + ": " + e.what());
  }
  return quantized_from_json(j, io::read_file(side));
}

}  // namespace carsnn
