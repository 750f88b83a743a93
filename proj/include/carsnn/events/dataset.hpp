#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/core/parallel.hpp"
#include "carsnn/events/dat.hpp"
#include "carsnn/events/event.hpp"
#include "carsnn/events/evtcsv.hpp"

namespace carsnn {

enum class EventFormat { Dat, EvtCsv };

inline std::string_view extension_of(EventFormat f) { return f == EventFormat::Dat ? ".dat" : ".evt.csv"; }

inline EventFormat parse_event_format(std::string_view name) {
  if (name == "dat") return EventFormat::Dat;
  if (name == "evtcsv" || name == "evt.csv" || name == "csv") return EventFormat::EvtCsv;
  fail(ErrorCode::InvalidConfig, "unknown event format '" + std::string(name) + "' (expected dat or evtcsv)");
}

/// Class directory names and the label each one maps to, in the
/// (lexicographic) order their files appear in a split.
inline constexpr std::pair<std::string_view, int> kClassDirectories[] = {{"background", kBackground}, {"cars", kCar}};

namespace detail {

inline bool has_suffix(const std::string& name, std::string_view suffix) {
  return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline std::vector<std::pair<std::filesystem::path, int>> list_split(const std::filesystem::path& split_dir,
                                                                     EventFormat format) {
  std::vector<std::pair<std::filesystem::path, int>> files;
  for (const auto& [dir_name, label] : kClassDirectories) {
    const auto class_dir = split_dir / std::string(dir_name);
    if (!std::filesystem::is_directory(class_dir))
      fail(ErrorCode::EmptyClassDirectory, class_dir.string() + " does not exist");
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(class_dir))
      if (entry.is_regular_file() && has_suffix(entry.path().filename().string(), extension_of(format)))
        paths.push_back(entry.path());
    if (paths.empty())
      fail(ErrorCode::EmptyClassDirectory,
           class_dir.string() + " has no " + std::string(extension_of(format)) + " files");
    std::sort(paths.begin(), paths.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    for (auto& p : paths) files.emplace_back(std::move(p), label);
  }
  return files;
}

inline std::vector<EventStream> load_split(const std::filesystem::path& split_dir, EventFormat format,
                                           std::size_t threads) {
  const auto files = list_split(split_dir, format);
  std::vector<EventStream> streams(files.size());
  parallel_for(files.size(), threads, [&](std::size_t i) {
    streams[i] = format == EventFormat::Dat ? dat::load_dat(files[i].first) : evtcsv::load_evtcsv(files[i].first);
    streams[i].label = files[i].second;
    validate(streams[i]);
  });
  return streams;
}

}  // namespace detail

/// Loads `{train,test}/{cars,background}/*.<ext>`. Within a split the
/// order is class directory name, then file name, regardless of `threads`.
inline Dataset load_dataset(const std::filesystem::path& root, EventFormat format, std::size_t threads = 1) {
  for (const char* split : {"train", "test"})
    if (!std::filesystem::is_directory(root / split))
      fail(ErrorCode::MissingSplit, (root / split).string() + " is missing");
  Dataset d;
  d.train = detail::load_split(root / "train", format, threads);
  d.test = detail::load_split(root / "test", format, threads);
  return d;
}

/// Writes a dataset in the layout load_dataset expects (portable format).
inline void write_dataset(const Dataset& d, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  for (const auto& [split, streams] : {std::pair{"train", &d.train}, std::pair{"test", &d.test}}) {
    for (const auto& [dir_name, label] : kClassDirectories) fs::create_directories(root / split / std::string(dir_name));
    std::size_t index = 0;
    for (const EventStream& s : *streams) {
      const int label = s.label.value_or(kBackground);
      const std::string dir = label == kCar ? "cars" : "background";
      char name[32];
      std::snprintf(name, sizeof name, "%06zu.evt.csv", index++);
      io::write_text(root / split / dir / name, evtcsv::write_evtcsv(s));
    }
  }
}

}  // namespace carsnn
