#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include "carsnn/core/error.hpp"
#include "carsnn/events/event.hpp"

namespace carsnn {

/// Axis-aligned crop region; the origin is the bottom-left corner.
struct AttentionWindow {
  std::uint32_t origin_x = 0;
  std::uint32_t origin_y = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  bool contains(std::uint32_t x, std::uint32_t y) const {
    return x >= origin_x && y >= origin_y && x - origin_x < width && y - origin_y < height;
  }

  friend bool operator==(const AttentionWindow&, const AttentionWindow&) = default;
};

/// The two windows used by the cropped model variants: 50x50 and 100x100,
/// both anchored at the bottom-left corner.
inline constexpr AttentionWindow kFirstAttentionWindow{0, 0, 50, 50};
inline constexpr AttentionWindow kSecondAttentionWindow{0, 0, 100, 100};

/// Keeps the events inside `window` and re-bases them so the window origin
/// becomes (0, 0). The result has the window's size even when the window
/// extends past the source canvas (the overhang simply has no events),
/// which is how smaller recordings are zero-padded onto a larger input.
inline EventStream crop(const EventStream& stream, const AttentionWindow& window) {
  if (window.width == 0 || window.height == 0)
    fail(ErrorCode::DegenerateWindow, "window has zero area");
  if (window.origin_x >= stream.width || window.origin_y >= stream.height)
    fail(ErrorCode::DegenerateWindow, "window origin (" + std::to_string(window.origin_x) + "," +
                                          std::to_string(window.origin_y) + ") lies outside the " +
                                          std::to_string(stream.width) + "x" + std::to_string(stream.height) +
                                          " canvas");
  EventStream out;
  out.width = window.width;
  out.height = window.height;
  out.label = stream.label;
  out.duration_us = stream.duration_us;
  for (const Event& e : stream.events) {
    if (!window.contains(e.x, e.y)) continue;
    out.events.push_back(Event{e.t, static_cast<std::uint16_t>(e.x - window.origin_x),
                               static_cast<std::uint16_t>(e.y - window.origin_y), e.p});
  }
  return out;
}

}  // namespace carsnn
