#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "carsnn/core/error.hpp"
#include "carsnn/core/rng.hpp"
#include "carsnn/events/event.hpp"

namespace carsnn {

enum class SyntheticPattern { MovingBar, Blob, UniformNoise };

inline SyntheticPattern parse_pattern(std::string_view name) {
  if (name == "moving-bar") return SyntheticPattern::MovingBar;
  if (name == "blob") return SyntheticPattern::Blob;
  if (name == "uniform-noise") return SyntheticPattern::UniformNoise;
  fail(ErrorCode::InvalidSpec, "unknown pattern '" + std::string(name) + "'");
}

inline std::string_view to_string(SyntheticPattern p) {
  switch (p) {
    case SyntheticPattern::MovingBar: return "moving-bar";
    case SyntheticPattern::Blob: return "blob";
    case SyntheticPattern::UniformNoise: return "uniform-noise";
  }
  return "?";
}

/// Desk-scale stand-in for a labeled event dataset. Car streams (class 1)
/// carry the structured pattern; background streams (class 0) are uniform
/// noise with the same expected event count.
struct SyntheticSpec {
  std::uint32_t width = 50;
  std::uint32_t height = 50;
  std::uint32_t n_per_class = 100;
  std::uint32_t n_test_per_class = 100;
  std::uint64_t duration_us = 100'000;
  SyntheticPattern pattern = SyntheticPattern::MovingBar;
  double event_rate = 150.0;  // events per millisecond
  std::uint64_t seed = 7;
  /// Relative jitter of the per-stream event count (uniform in +-).
  double count_jitter = 0.1;
};

namespace detail {

inline void check(const SyntheticSpec& spec) {
  if (spec.n_per_class == 0) fail(ErrorCode::InvalidSpec, "n_per_class must be > 0");
  if (!(spec.event_rate > 0.0)) fail(ErrorCode::InvalidSpec, "event_rate must be > 0");
  if (spec.width < 4 || spec.height < 4) fail(ErrorCode::InvalidSpec, "canvas must be at least 4x4");
  if (spec.duration_us == 0) fail(ErrorCode::InvalidSpec, "duration_us must be > 0");
  if (!(spec.count_jitter >= 0.0 && spec.count_jitter < 1.0)) fail(ErrorCode::InvalidSpec, "count_jitter must be in [0,1)");
}

inline std::uint16_t clamp_coord(double v, std::uint32_t limit) {
  const double c = std::clamp(std::floor(v), 0.0, static_cast<double>(limit - 1));
  return static_cast<std::uint16_t>(c);
}

inline EventStream synth_stream(const SyntheticSpec& spec, int label, Rng& rng) {
  EventStream s;
  s.width = spec.width;
  s.height = spec.height;
  s.duration_us = spec.duration_us;
  s.label = label;
  const double expected = spec.event_rate * static_cast<double>(spec.duration_us) / 1000.0;
  const double jitter = uniform_real(rng, 1.0 - spec.count_jitter, 1.0 + spec.count_jitter);
  const auto n = static_cast<std::size_t>(std::llround(expected * jitter));

  std::vector<std::uint64_t> times(n);
  for (auto& t : times) t = uniform_u64(rng, 0, spec.duration_us - 1);
  std::sort(times.begin(), times.end());
  s.events.reserve(n);

  const SyntheticPattern pattern = label == kCar ? spec.pattern : SyntheticPattern::UniformNoise;
  const double w = spec.width;
  const double h = spec.height;
  switch (pattern) {
    case SyntheticPattern::MovingBar: {
      // A full-height bar sweeping horizontally once per stream, wrapping at
      // the border. The leading half emits ON events, the trailing half OFF.
      const auto bar = std::max<std::uint32_t>(2, spec.width / 10);
      const double x0 = uniform_real(rng, 0.0, w);
      const double dir = uniform01(rng) < 0.5 ? -1.0 : 1.0;
      const double speed = w / static_cast<double>(spec.duration_us);
      for (std::uint64_t t : times) {
        const double pos = x0 + dir * speed * static_cast<double>(t);
        const auto k = static_cast<std::uint32_t>(uniform_u64(rng, 0, bar - 1));
        auto col = static_cast<std::int64_t>(std::floor(pos)) + k;
        col = ((col % spec.width) + spec.width) % spec.width;
        const bool leading = dir > 0 ? (k >= bar / 2) : (k < bar - bar / 2);
        s.events.push_back(Event{t, static_cast<std::uint16_t>(col), clamp_coord(uniform_real(rng, 0.0, h), spec.height),
                                 static_cast<std::uint8_t>(leading ? 1 : 0)});
      }
      break;
    }
    case SyntheticPattern::Blob: {
      // Gaussian hot spot in the bottom-left quadrant.
      const double cx = w / 4.0 + normal(rng, 0.0, w / 40.0);
      const double cy = h / 4.0 + normal(rng, 0.0, h / 40.0);
      const double sigma = std::min(w, h) / 12.0;
      for (std::uint64_t t : times) {
        const double x = normal(rng, cx, sigma);
        const double y = normal(rng, cy, sigma);
        s.events.push_back(Event{t, clamp_coord(x, spec.width), clamp_coord(y, spec.height),
                                 static_cast<std::uint8_t>(uniform01(rng) < 0.5 ? 1 : 0)});
      }
      break;
    }
    case SyntheticPattern::UniformNoise: {
      for (std::uint64_t t : times) {
        const auto x = static_cast<std::uint16_t>(uniform_u64(rng, 0, spec.width - 1));
        const auto y = static_cast<std::uint16_t>(uniform_u64(rng, 0, spec.height - 1));
        s.events.push_back(Event{t, x, y, static_cast<std::uint8_t>(uniform_u64(rng, 0, 1))});
      }
      break;
    }
  }
  return s;
}

inline std::vector<EventStream> synth_split(const SyntheticSpec& spec, std::uint32_t per_class, std::uint64_t split_id) {
  std::vector<EventStream> out;
  out.reserve(2 * per_class);
  // Interleave classes so prefixes of a split stay balanced.
  for (std::uint32_t i = 0; i < per_class; ++i) {
    for (int label : {kBackground, kCar}) {
      Rng rng = named_rng(spec.seed, "synthetic", {split_id, static_cast<std::uint64_t>(label), i});
      out.push_back(synth_stream(spec, label, rng));
    }
  }
  return out;
}

}  // namespace detail

inline Dataset gen_synthetic(const SyntheticSpec& spec) {
  detail::check(spec);
  Dataset d;
  d.train = detail::synth_split(spec, spec.n_per_class, 0);
  d.test = detail::synth_split(spec, spec.n_test_per_class, 1);
  return d;
}

}  // namespace carsnn
