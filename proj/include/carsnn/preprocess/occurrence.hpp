#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/events/event.hpp"
#include "carsnn/preprocess/window.hpp"

namespace carsnn {

/// Per-pixel event totals (both polarities) over a set of streams.
struct OccurrenceMap {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint64_t> counts;  // row-major, row 0 = bottom

  std::uint64_t at(std::uint32_t x, std::uint32_t y) const { return counts[std::size_t{y} * width + x]; }
  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }
};

/// Streams of different sizes share one canvas, bottom-left aligned, whose
/// size is the largest width and height seen.
inline OccurrenceMap event_occurrence_map(std::span<const EventStream> streams) {
  if (streams.empty()) fail(ErrorCode::EmptyInput, "no streams to count");
  OccurrenceMap m;
  for (const auto& s : streams) {
    m.width = std::max(m.width, s.width);
    m.height = std::max(m.height, s.height);
  }
  m.counts.assign(std::size_t{m.width} * m.height, 0);
  for (const auto& s : streams)
    for (const Event& e : s.events) ++m.counts[std::size_t{e.y} * m.width + e.x];
  return m;
}

inline std::uint64_t window_count(const OccurrenceMap& m, const AttentionWindow& w) {
  std::uint64_t sum = 0;
  const std::uint32_t x_end = std::min(m.width, w.origin_x + w.width);
  const std::uint32_t y_end = std::min(m.height, w.origin_y + w.height);
  for (std::uint32_t y = w.origin_y; y < y_end; ++y)
    for (std::uint32_t x = w.origin_x; x < x_end; ++x) sum += m.at(x, y);
  return sum;
}

struct WindowShare {
  AttentionWindow window;
  std::uint64_t events = 0;
  double share = 0.0;  // fraction of all events in the map
};

/// Tiles the canvas with size x size windows on a grid anchored at the
/// bottom-left corner (edge tiles may be partial) and returns every tile's
/// share, densest first. Ties keep grid order (bottom row first, then left
/// to right), so the bottom-left tile wins a tie.
inline std::vector<WindowShare> tile_shares(const OccurrenceMap& m, std::uint32_t size) {
  if (size == 0) fail(ErrorCode::DegenerateWindow, "tile size must be > 0");
  const double total = static_cast<double>(m.total());
  std::vector<WindowShare> tiles;
  for (std::uint32_t y = 0; y < m.height; y += size)
    for (std::uint32_t x = 0; x < m.width; x += size) {
      WindowShare t;
      t.window = AttentionWindow{x, y, size, size};
      t.events = window_count(m, t.window);
      t.share = total > 0 ? static_cast<double>(t.events) / total : 0.0;
      tiles.push_back(t);
    }
  std::stable_sort(tiles.begin(), tiles.end(), [](const auto& a, const auto& b) { return a.events > b.events; });
  return tiles;
}

/// CSV grid, one line per row starting from the bottom row (y = 0).
inline std::string occurrence_csv(const OccurrenceMap& m) {
  std::string out;
  for (std::uint32_t y = 0; y < m.height; ++y) {
    for (std::uint32_t x = 0; x < m.width; ++x) {
      if (x) out += ',';
      out += std::to_string(m.at(x, y));
    }
    out += '\n';
  }
  return out;
}

/// Binary PGM (P5) heatmap scaled to the maximum count. Image rows run top
/// to bottom, so the bottom-left origin displays where it belongs.
inline std::vector<std::uint8_t> occurrence_pgm(const OccurrenceMap& m) {
  const std::string header = "P5\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::uint64_t peak = m.counts.empty() ? 0 : *std::max_element(m.counts.begin(), m.counts.end());
  for (std::uint32_t row = 0; row < m.height; ++row) {
    const std::uint32_t y = m.height - 1 - row;
    for (std::uint32_t x = 0; x < m.width; ++x)
      out.push_back(peak ? static_cast<std::uint8_t>((m.at(x, y) * 255 + peak / 2) / peak) : 0);
  }
  return out;
}

}  // namespace carsnn
