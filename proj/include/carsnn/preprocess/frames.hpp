#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/core/rng.hpp"
#include "carsnn/events/event.hpp"

namespace carsnn {

/// How event streams become network input.
struct AccumulationConfig {
  std::uint64_t t_sample_us = 1'000;   // T_s: one frame per T_s of events
  std::uint64_t t_length_us = 10'000;  // T_l: clip length, a multiple of T_s
  std::uint32_t frame_repeat = 20;     // timesteps each frame is held at the input

  std::uint64_t frames_per_clip() const { return t_length_us / t_sample_us; }
};

inline void validate(const AccumulationConfig& c) {
  if (c.t_sample_us == 0) fail(ErrorCode::InvalidConfig, "t_sample_us must be > 0");
  if (c.t_length_us == 0 || c.t_length_us % c.t_sample_us != 0)
    fail(ErrorCode::InvalidConfig, "t_length_us must be a positive multiple of t_sample_us");
  if (c.frame_repeat == 0) fail(ErrorCode::InvalidConfig, "frame_repeat must be >= 1");
}

/// Binary two-channel image: channel 0 = OFF, 1 = ON.
struct SpikeFrame {
  static constexpr std::uint32_t kChannels = 2;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> bits;  // [channel][y][x]

  SpikeFrame() = default;
  SpikeFrame(std::uint32_t h, std::uint32_t w) : height(h), width(w), bits(std::size_t{kChannels} * h * w, 0) {}

  std::size_t index(std::uint32_t c, std::uint32_t y, std::uint32_t x) const {
    return (std::size_t{c} * height + y) * width + x;
  }
  std::uint8_t at(std::uint32_t c, std::uint32_t y, std::uint32_t x) const { return bits[index(c, y, x)]; }
  std::size_t active() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

  friend bool operator==(const SpikeFrame&, const SpikeFrame&) = default;
};

/// Saturating OR of the events in [t0, t0 + t_sample): a pixel carries at
/// most one spike per polarity channel no matter how many events hit it.
inline SpikeFrame accumulate(const EventStream& stream, std::uint64_t t0, std::uint64_t t_sample_us) {
  SpikeFrame f(stream.height, stream.width);
  const auto by_time = [](const Event& e, std::uint64_t t) { return e.t < t; };
  auto it = std::lower_bound(stream.events.begin(), stream.events.end(), t0, by_time);
  const std::uint64_t t1 = t0 + t_sample_us;
  for (; it != stream.events.end() && it->t < t1; ++it) f.bits[f.index(it->p, it->y, it->x)] = 1;
  return f;
}

/// Clip start actually used for a requested t0: clips never run past the
/// end of the stream, and streams shorter than T_l start at 0 (their
/// missing tail yields empty frames).
inline std::uint64_t clamp_clip_start(const EventStream& stream, std::uint64_t t0, std::uint64_t t_length_us) {
  if (stream.duration_us <= t_length_us) return 0;
  return std::min(t0, stream.duration_us - t_length_us);
}

inline std::vector<SpikeFrame> sample_frames(const EventStream& stream, std::uint64_t t0,
                                             const AccumulationConfig& config) {
  validate(config);
  t0 = clamp_clip_start(stream, t0, config.t_length_us);
  std::vector<SpikeFrame> frames;
  const std::uint64_t n = config.frames_per_clip();
  frames.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) frames.push_back(accumulate(stream, t0 + k * config.t_sample_us, config.t_sample_us));
  return frames;
}

/// Uniform clip start in [0, duration - T_l]; 0 when the stream is too short.
inline std::uint64_t random_clip(const EventStream& stream, std::uint64_t t_length_us, Rng& rng) {
  if (stream.duration_us <= t_length_us) return 0;
  return uniform_u64(rng, 0, stream.duration_us - t_length_us);
}

}  // namespace carsnn
