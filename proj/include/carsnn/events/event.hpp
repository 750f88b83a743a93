#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "carsnn/core/error.hpp"

namespace carsnn {

enum class Polarity : std::uint8_t { Off = 0, On = 1 };

/// Class ids used throughout: the output neuron index of the network.
inline constexpr int kBackground = 0;
inline constexpr int kCar = 1;

/// One brightness-change event. Coordinates use a bottom-left origin:
/// y = 0 is the lowest sensor row.
struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint8_t p = 0;  // 0 = OFF, 1 = ON

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventStream {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<Event> events;
  std::optional<int> label;
  std::uint64_t duration_us = 0;

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

struct Dataset {
  std::vector<EventStream> train;
  std::vector<EventStream> test;
  std::vector<std::string> class_names{"background", "car"};
};

/// Checks the stream invariants: sorted timestamps, in-bounds coordinates,
/// binary polarity and a duration covering the last event.
inline void validate(const EventStream& s) {
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const Event& e = s.events[i];
    if (e.x >= s.width || e.y >= s.height)
      fail(ErrorCode::OutOfBoundsEvent, "event " + std::to_string(i) + " at (" + std::to_string(e.x) + "," +
                                            std::to_string(e.y) + ") outside " + std::to_string(s.width) + "x" +
                                            std::to_string(s.height));
    if (e.p > 1) fail(ErrorCode::OutOfBoundsEvent, "event " + std::to_string(i) + " has polarity " + std::to_string(e.p));
    if (e.t < last) fail(ErrorCode::NonMonotonicTimestamp, "event " + std::to_string(i) + " goes back in time");
    last = e.t;
  }
  if (!s.events.empty() && s.duration_us < s.events.back().t)
    fail(ErrorCode::OutOfBoundsEvent, "duration " + std::to_string(s.duration_us) + " shorter than last timestamp");
}

}  // namespace carsnn
