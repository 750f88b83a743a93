#pragma once

// Portable text event format (".evt.csv"):
//
//   width,height,duration_us,label        <- label: class id, or -1 if unlabeled
//   t,x,y,p                               <- one line per event, t non-decreasing
//
// Blank lines are ignored; a trailing newline is optional.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

#include "carsnn/core/binary_io.hpp"
#include "carsnn/core/error.hpp"
#include "carsnn/events/event.hpp"

namespace carsnn::evtcsv {

namespace detail {

template <class T>
bool parse_fields(std::string_view line, T* out, std::size_t n) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t comma = i + 1 < n ? line.find(',', pos) : line.size();
    if (comma == std::string_view::npos) return false;
    std::string_view field = line.substr(pos, comma - pos);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out[i]);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) return false;
    pos = comma + 1;
  }
  return true;
}

[[noreturn]] inline void malformed(std::size_t line_no, std::string_view line) {
  fail(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": '" + std::string(line) + "'");
}

}  // namespace detail

inline EventStream parse_evtcsv(std::string_view text) {
  EventStream s;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    if (!have_header) {
      std::int64_t h[4];
      if (!detail::parse_fields(line, h, 4) || h[0] <= 0 || h[1] <= 0 || h[0] > 65536 || h[1] > 65536 || h[2] < 0 ||
          h[3] < -1)
        detail::malformed(line_no, line);
      s.width = static_cast<std::uint32_t>(h[0]);
      s.height = static_cast<std::uint32_t>(h[1]);
      s.duration_us = static_cast<std::uint64_t>(h[2]);
      if (h[3] >= 0) s.label = static_cast<int>(h[3]);
      have_header = true;
      continue;
    }
    std::int64_t f[4];
    if (!detail::parse_fields(line, f, 4) || f[0] < 0 || f[1] < 0 || f[2] < 0) detail::malformed(line_no, line);
    if (f[3] != 0 && f[3] != 1) detail::malformed(line_no, line);
    if (f[1] >= s.width || f[2] >= s.height)
      fail(ErrorCode::OutOfBoundsEvent, "line " + std::to_string(line_no) + ": (" + std::to_string(f[1]) + "," +
                                            std::to_string(f[2]) + ") outside " + std::to_string(s.width) + "x" +
                                            std::to_string(s.height));
    const auto t = static_cast<std::uint64_t>(f[0]);
    if (!s.events.empty() && t < s.events.back().t)
      fail(ErrorCode::NonMonotonicTimestamp, "line " + std::to_string(line_no) + ": t=" + std::to_string(t) +
                                                 " after t=" + std::to_string(s.events.back().t));
    if (t > s.duration_us)
      fail(ErrorCode::OutOfBoundsEvent,
           "line " + std::to_string(line_no) + ": t=" + std::to_string(t) + " beyond duration");
    s.events.push_back(Event{t, static_cast<std::uint16_t>(f[1]), static_cast<std::uint16_t>(f[2]),
                             static_cast<std::uint8_t>(f[3])});
  }
  if (!have_header) fail(ErrorCode::MalformedLine, "line 1: missing header");
  return s;
}

inline std::string write_evtcsv(const EventStream& s) {
  std::string out;
  out.reserve(32 + s.events.size() * 20);
  out += std::to_string(s.width) + ',' + std::to_string(s.height) + ',' + std::to_string(s.duration_us) + ',' +
         std::to_string(s.label.value_or(-1)) + '\n';
  for (const Event& e : s.events) {
    out += std::to_string(e.t);
    out += ',';
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += ',';
    out += static_cast<char>('0' + e.p);
    out += '\n';
  }
  return out;
}

inline EventStream load_evtcsv(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  try {
    return parse_evtcsv(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

}  // namespace carsnn::evtcsv
