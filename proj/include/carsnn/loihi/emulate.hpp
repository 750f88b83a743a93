#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/core/parallel.hpp"
#include "carsnn/core/rng.hpp"
#include "carsnn/loihi/cuba.hpp"
#include "carsnn/loihi/quantize.hpp"
#include "carsnn/preprocess/frames.hpp"
#include "carsnn/snn/simulate.hpp"
#include "carsnn/stbp/train.hpp"

namespace carsnn {

/// Each frame is held at the input for `replication` timesteps, then
/// `blank` timesteps of zero input let the state decay before the next one.
struct EmulationConfig {
  std::uint32_t replication = 10;
  std::uint32_t blank = 7;

  std::uint32_t timesteps_per_inference() const { return replication + blank; }
};

inline void validate(const EmulationConfig& c) {
  if (c.replication == 0) fail(ErrorCode::InvalidConfig, "replication must be >= 1");
}

struct EmulationResult {
  int class_id = 0;
  std::vector<int> per_frame;
  std::vector<std::array<std::uint32_t, 2>> output_counts;  // per frame
  std::uint32_t timesteps_per_inference = 0;
  std::uint32_t timesteps = 0;
  /// Output-layer spikes per timestep, filled when requested.
  std::vector<std::array<std::uint8_t, 2>> trace;
};

/// Runs a clip through the integer model. State starts at zero and carries
/// across frames; each frame is classified from its own window of
/// replication + blank timesteps with the same tie rules as the float model.
inline EmulationResult emulate_inference(CubaNetwork& chip, std::span<const SpikeFrame> frames,
                                         const EmulationConfig& cfg = {}, bool keep_trace = false) {
  validate(cfg);
  const QuantizedNetwork& q = chip.network();
  if (frames.empty()) fail(ErrorCode::EmptyInput, "no frames to emulate");
  if (q.layers.back().neurons() != 2) fail(ErrorCode::ShapeMismatch, "output layer must have 2 neurons");
  for (const auto& f : frames)
    if (q.input.channels != SpikeFrame::kChannels || f.height != q.input.height || f.width != q.input.width)
      fail(ErrorCode::ShapeMismatch, "frame " + std::to_string(f.height) + "x" + std::to_string(f.width) +
                                         " does not match network input " + to_string(q.input));
  EmulationResult r;
  r.timesteps_per_inference = cfg.timesteps_per_inference();
  const std::size_t out = chip.layer_count() - 1;
  const std::vector<std::uint8_t> zeros(q.input.size(), 0);
  chip.reset();
  for (const auto& f : frames) {
    std::array<std::uint32_t, 2> counts{0, 0};
    for (std::uint32_t t = 0; t < cfg.timesteps_per_inference(); ++t) {
      chip.step(t < cfg.replication ? std::span<const std::uint8_t>(f.bits) : std::span<const std::uint8_t>(zeros));
      const auto s = chip.spikes(out);
      counts[0] += s[0];
      counts[1] += s[1];
      if (keep_trace) r.trace.push_back({s[0], s[1]});
      ++r.timesteps;
    }
    const auto& v = chip.state(out).comp_v;
    r.per_frame.push_back(argmax_with_ties<std::uint32_t, std::int64_t>(counts, v));
    r.output_counts.push_back(counts);
  }
  r.class_id = predict_stream(r.per_frame);
  return r;
}

inline EmulationResult emulate_inference(const QuantizedNetwork& q, std::span<const SpikeFrame> frames,
                                         const EmulationConfig& cfg = {}, bool keep_trace = false) {
  CubaNetwork chip(q);
  return emulate_inference(chip, frames, cfg, keep_trace);
}

/// Emulated counterpart of evaluate_split: same clip starts (drawn from
/// the same generator), so float and chip accuracies are paired.
inline SplitAccuracy emulate_split(const QuantizedNetwork& q, std::span<const EventStream> streams,
                                   const TrainConfig& config, const EmulationConfig& emu, std::uint64_t split_id) {
  struct Outcome {
    std::size_t frames = 0, frames_correct = 0;
    bool stream_correct = false;
  };
  std::vector<Outcome> outcomes(streams.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(config.threads, streams.size()));
  const std::size_t chunk = (streams.size() + workers - 1) / workers;
  parallel_for(workers, workers, [&](std::size_t w) {
    CubaNetwork chip(q);
    for (std::size_t i = w * chunk; i < std::min(streams.size(), (w + 1) * chunk); ++i) {
      const EventStream& s = streams[i];
      if (!s.label) fail(ErrorCode::InvalidConfig, "emulation accuracy needs labeled streams");
      const EventStream prepared = prepare_stream(s, q.input, config.window_x, config.window_y);
      Rng rng = named_rng(config.seed, "eval-clip", {split_id, i});
      const auto t0 = random_clip(prepared, config.accumulation.t_length_us, rng);
      const auto frames = sample_frames(prepared, t0, config.accumulation);
      const auto r = emulate_inference(chip, frames, emu);
      Outcome& o = outcomes[i];
      o.frames = r.per_frame.size();
      o.frames_correct = static_cast<std::size_t>(std::count(r.per_frame.begin(), r.per_frame.end(), *s.label));
      o.stream_correct = r.class_id == *s.label;
    }
  });
  SplitAccuracy acc;
  for (const auto& o : outcomes) {
    acc.frames += o.frames;
    acc.frames_correct += o.frames_correct;
    ++acc.streams;
    acc.streams_correct += o.stream_correct ? 1 : 0;
  }
  return acc;
}

struct EmulationMetrics {
  double acc_s = 0.0;
  double acc_test = 0.0;
  double acc_train = 0.0;
  std::uint32_t timesteps_per_inference = 0;
};

inline EmulationMetrics emulate_dataset(const QuantizedNetwork& q, const Dataset& data, const TrainConfig& config,
                                        const EmulationConfig& emu = {}, bool include_train = true) {
  EmulationMetrics m;
  m.timesteps_per_inference = emu.timesteps_per_inference();
  const auto test = emulate_split(q, data.test, config, emu, kTestSplit);
  m.acc_s = test.frame_accuracy();
  m.acc_test = test.stream_accuracy();
  if (include_train) m.acc_train = emulate_split(q, data.train, config, emu, kTrainSplit).stream_accuracy();
  return m;
}

}  // namespace carsnn
