#pragma once

// Reader for ATIS/Prophesee ".dat" recordings (the N-CARS file format).
//
// Layout:
//   * ASCII header lines, each starting with '%' and ending with '\n'.
//     Recognised keys: "Version N", "Width N", "Height N",
//     "geometry WxH", "Duration N" (microseconds). Others are ignored.
//   * When Version > 0: one byte event type (0x00 TD-2D or 0x0C CD) and
//     one byte event size (must be 8).
//   * 8-byte little-endian records:
//       uint32 timestamp (us)
//       uint32 word: bits 0..13 = x, bits 14..27 = y, bit 28 = polarity.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "carsnn/core/binary_io.hpp"
#include "carsnn/core/error.hpp"
#include "carsnn/events/event.hpp"

namespace carsnn::dat {

inline constexpr std::uint32_t kDefaultWidth = 304;
inline constexpr std::uint32_t kDefaultHeight = 240;
inline constexpr std::size_t kRecordSize = 8;
inline constexpr std::uint8_t kTypeTd2d = 0x00;
inline constexpr std::uint8_t kTypeCd = 0x0C;

inline constexpr std::uint32_t kXMask = 0x00003FFFu;
inline constexpr std::uint32_t kYMask = 0x0FFFC000u;
inline constexpr std::uint32_t kYShift = 14;
inline constexpr std::uint32_t kPolarityBit = 0x10000000u;

struct Header {
  int version = 0;
  std::uint32_t width = kDefaultWidth;
  std::uint32_t height = kDefaultHeight;
  std::optional<std::uint64_t> duration_us;
  std::size_t payload_offset = 0;
};

namespace detail {

inline std::uint64_t parse_header_number(std::string_view token, std::string_view line) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    fail(ErrorCode::MalformedHeader, "bad number in header line '" + std::string(line) + "'");
  return value;
}

}  // namespace detail

inline Header parse_header(std::span<const std::uint8_t> bytes) {
  Header h;
  std::size_t pos = 0;
  if (bytes.empty() || bytes[0] != '%') fail(ErrorCode::MalformedHeader, "missing '%' header");
  while (pos < bytes.size() && bytes[pos] == '%') {
    const auto nl = std::find(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), std::uint8_t{'\n'});
    if (nl == bytes.end()) fail(ErrorCode::MalformedHeader, "unterminated header line");
    const auto end = static_cast<std::size_t>(nl - bytes.begin());
    std::string line(reinterpret_cast<const char*>(bytes.data()) + pos + 1, end - pos - 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream words(line);
    std::string key, value;
    words >> key >> value;
    if (key == "Version") {
      h.version = static_cast<int>(detail::parse_header_number(value, line));
    } else if (key == "Width") {
      h.width = static_cast<std::uint32_t>(detail::parse_header_number(value, line));
    } else if (key == "Height") {
      h.height = static_cast<std::uint32_t>(detail::parse_header_number(value, line));
    } else if (key == "Duration") {
      h.duration_us = detail::parse_header_number(value, line);
    } else if (key == "geometry") {
      const auto x = value.find('x');
      if (x == std::string::npos) fail(ErrorCode::MalformedHeader, "bad geometry '" + line + "'");
      h.width = static_cast<std::uint32_t>(detail::parse_header_number(std::string_view(value).substr(0, x), line));
      h.height = static_cast<std::uint32_t>(detail::parse_header_number(std::string_view(value).substr(x + 1), line));
    }
    pos = end + 1;
  }
  if (h.width == 0 || h.height == 0 || h.width > kXMask + 1 || h.height > (kYMask >> kYShift) + 1)
    fail(ErrorCode::MalformedHeader, "unsupported geometry");
  if (h.version > 0) {
    if (bytes.size() < pos + 2) fail(ErrorCode::MalformedHeader, "missing event type/size bytes");
    const std::uint8_t type = bytes[pos];
    const std::uint8_t size = bytes[pos + 1];
    if (type != kTypeTd2d && type != kTypeCd)
      fail(ErrorCode::UnknownEventType, "event type " + std::to_string(type) + " is not a 2D event");
    if (size != kRecordSize) fail(ErrorCode::UnknownEventType, "event size " + std::to_string(size) + " != 8");
    pos += 2;
  }
  h.payload_offset = pos;
  return h;
}

/// Decodes a whole recording. Events are returned sorted by timestamp
/// (stable, so equal timestamps keep file order).
inline EventStream parse_dat(std::span<const std::uint8_t> bytes) {
  const Header h = parse_header(bytes);
  const std::size_t payload = bytes.size() - h.payload_offset;
  if (payload % kRecordSize != 0)
    fail(ErrorCode::TruncatedRecord,
         std::to_string(payload) + " payload bytes is not a multiple of " + std::to_string(kRecordSize));
  EventStream s;
  s.width = h.width;
  s.height = h.height;
  s.events.reserve(payload / kRecordSize);
  for (std::size_t off = h.payload_offset; off < bytes.size(); off += kRecordSize) {
    const auto t = io::get_le<std::uint32_t>(bytes, off);
    const auto word = io::get_le<std::uint32_t>(bytes, off + 4);
    Event e;
    e.t = t;
    e.x = static_cast<std::uint16_t>(word & kXMask);
    e.y = static_cast<std::uint16_t>((word & kYMask) >> kYShift);
    e.p = (word & kPolarityBit) ? 1 : 0;
    if (e.x >= s.width || e.y >= s.height)
      fail(ErrorCode::OutOfBoundsEvent, "record " + std::to_string((off - h.payload_offset) / kRecordSize) + " at (" +
                                            std::to_string(e.x) + "," + std::to_string(e.y) + ")");
    s.events.push_back(e);
  }
  if (!std::is_sorted(s.events.begin(), s.events.end(), [](const Event& a, const Event& b) { return a.t < b.t; }))
    std::stable_sort(s.events.begin(), s.events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  const std::uint64_t last = s.events.empty() ? 0 : s.events.back().t;
  s.duration_us = h.duration_us ? std::max(*h.duration_us, last) : last;
  return s;
}

inline EventStream load_dat(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  try {
    return parse_dat(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

}  // namespace carsnn::dat
