#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "carsnn/core/error.hpp"
#include "carsnn/core/parallel.hpp"
#include "carsnn/core/rng.hpp"
#include "carsnn/events/event.hpp"
#include "carsnn/preprocess/frames.hpp"
#include "carsnn/preprocess/window.hpp"
#include "carsnn/snn/network.hpp"
#include "carsnn/snn/simulate.hpp"
#include "carsnn/stbp/adam.hpp"
#include "carsnn/stbp/backward.hpp"

namespace carsnn {

struct TrainConfig {
  std::uint32_t epochs = 200;
  std::uint32_t batch_size = 40;
  double lr_initial = 1e-3;
  std::uint32_t lr_halving_period_epochs = 20;
  AccumulationConfig accumulation;  // T_s = 1 ms, T_l = 10 ms, 20 repeats
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool full_product_rule = false;
  /// Bottom-left corner of the region fed to the network when a stream is
  /// larger than the input (the window size is the network input size).
  std::uint32_t window_x = 0;
  std::uint32_t window_y = 0;
  /// Evaluate both splits after every epoch (otherwise only after the last).
  bool eval_every_epoch = true;

  LrSchedule schedule() const { return {lr_initial, lr_halving_period_epochs}; }
};

inline void validate(const TrainConfig& c) {
  if (c.batch_size == 0) fail(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (!(c.lr_initial > 0.0)) fail(ErrorCode::InvalidConfig, "lr_initial must be > 0");
  validate(c.accumulation);
}

struct EpochMetrics {
  std::uint32_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double acc_s = 0.0;
  double acc_test = 0.0;
  double acc_train = 0.0;
};

struct Metrics {
  double acc_s = 0.0;      // test frames classified correctly
  double acc_test = 0.0;   // test streams whose majority vote is correct
  double acc_train = 0.0;  // same on the training split
  std::vector<EpochMetrics> history;
};

struct SplitAccuracy {
  std::size_t frames = 0;
  std::size_t frames_correct = 0;
  std::size_t streams = 0;
  std::size_t streams_correct = 0;

  double frame_accuracy() const { return frames ? static_cast<double>(frames_correct) / frames : 0.0; }
  double stream_accuracy() const { return streams ? static_cast<double>(streams_correct) / streams : 0.0; }
};

/// Fits a stream to the network input: crops (or zero-pads) to an
/// input-sized window anchored at (window_x, window_y).
inline EventStream prepare_stream(const EventStream& s, const Shape3& input, std::uint32_t window_x = 0,
                                  std::uint32_t window_y = 0) {
  if (s.width == input.width && s.height == input.height && window_x == 0 && window_y == 0) return s;
  return crop(s, AttentionWindow{window_x, window_y, input.width, input.height});
}

/// Per-frame predictions of one clip starting at t0.
inline std::vector<int> predict_clip(Simulator& sim, const EventStream& prepared, std::uint64_t t0,
                                     const AccumulationConfig& acc) {
  std::vector<int> preds;
  for (const auto& f : sample_frames(prepared, t0, acc)) preds.push_back(classify_frame(sim, f, acc.frame_repeat));
  return preds;
}

/// Classifies every stream from one clip each. The clip start is drawn from
/// a generator keyed by (seed, split_id, stream index), so repeated
/// evaluations see identical clips. Results do not depend on `threads`.
inline SplitAccuracy evaluate_split(const NetworkSpec& net, std::span<const EventStream> streams,
                                    const TrainConfig& config, std::uint64_t split_id) {
  struct Outcome {
    std::size_t frames = 0, frames_correct = 0;
    bool stream_correct = false;
  };
  std::vector<Outcome> outcomes(streams.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(config.threads, streams.size()));
  std::vector<Simulator> sims;
  sims.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) sims.emplace_back(net);
  const std::size_t chunk = (streams.size() + workers - 1) / std::max<std::size_t>(1, workers);
  parallel_for(workers, workers, [&](std::size_t w) {
    for (std::size_t i = w * chunk; i < std::min(streams.size(), (w + 1) * chunk); ++i) {
      const EventStream& s = streams[i];
      if (!s.label) fail(ErrorCode::InvalidConfig, "evaluation needs labeled streams");
      const EventStream prepared = prepare_stream(s, net.input, config.window_x, config.window_y);
      Rng rng = named_rng(config.seed, "eval-clip", {split_id, i});
      const auto t0 = random_clip(prepared, config.accumulation.t_length_us, rng);
      const auto preds = predict_clip(sims[w], prepared, t0, config.accumulation);
      Outcome& o = outcomes[i];
      o.frames = preds.size();
      o.frames_correct = static_cast<std::size_t>(std::count(preds.begin(), preds.end(), *s.label));
      o.stream_correct = predict_stream(preds) == *s.label;
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

inline constexpr std::uint64_t kTrainSplit = 0;
inline constexpr std::uint64_t kTestSplit = 1;

inline Metrics evaluate(const NetworkSpec& net, const Dataset& data, const TrainConfig& config) {
  Metrics m;
  const auto test = evaluate_split(net, data.test, config, kTestSplit);
  const auto train = evaluate_split(net, data.train, config, kTrainSplit);
  m.acc_s = test.frame_accuracy();
  m.acc_test = test.stream_accuracy();
  m.acc_train = train.stream_accuracy();
  return m;
}

struct TrainResult {
  NetworkSpec network;
  AdamState adam;
  Metrics metrics;
};

/// Called after every epoch with the metrics just recorded.
using EpochCallback = std::function<void(const EpochMetrics&, const NetworkSpec&, const AdamState&)>;

struct BatchOutcome {
  GradientSet grads;
  double loss = 0.0;
};

/// Forward + backward for one batch of streams. Each stream contributes
/// one random clip; every frame of it is one sample of the loss. Per-stream
/// gradients are summed in batch order, `threads` at a time.
inline BatchOutcome run_batch(const NetworkSpec& net, std::span<const EventStream> train,
                              std::span<const std::size_t> batch, const TrainConfig& config, std::uint32_t epoch) {
  const auto& acc = config.accumulation;
  const std::size_t frames_per_clip = acc.frames_per_clip();
  const std::size_t samples = batch.size() * frames_per_clip;
  BackwardOptions bopt{config.full_product_rule, samples};
  BatchOutcome total{GradientSet::zeros_like(net), 0.0};
  const std::size_t group = std::max<std::size_t>(1, config.threads);
  for (std::size_t start = 0; start < batch.size(); start += group) {
    const std::size_t count = std::min(group, batch.size() - start);
    std::vector<BatchOutcome> parts(count);
    parallel_for(count, config.threads, [&](std::size_t k) {
      const std::size_t idx = batch[start + k];
      const EventStream& s = train[idx];
      if (!s.label) fail(ErrorCode::InvalidConfig, "training needs labeled streams");
      const EventStream prepared = prepare_stream(s, net.input, config.window_x, config.window_y);
      Rng rng = named_rng(config.seed, "clip", {epoch, idx});
      const auto t0 = random_clip(prepared, acc.t_length_us, rng);
      BatchOutcome part{GradientSet::zeros_like(net), 0.0};
      const int label = *s.label;
      for (const auto& frame : sample_frames(prepared, t0, acc)) {
        const StateRecord rec = forward(net, frame, acc.frame_repeat);
        const int labels[] = {label};
        part.loss += mse_loss(rec, labels, samples);
        part.grads += backward(net, rec, labels, bopt);
      }
      parts[k] = std::move(part);
    });
    for (auto& p : parts) {
      total.grads += p.grads;
      total.loss += p.loss;
    }
  }
  return total;
}

/// Trains with STBP + Adam. Reproducible for a fixed seed: shuffling, clip
/// starts and evaluation clips come from named generators, and reductions
/// run in index order, so the thread count never changes the result.
inline TrainResult train(const Dataset& data, NetworkSpec net, const TrainConfig& config,
                         const EpochCallback& on_epoch = {}, const AdamState* resume = nullptr,
                         std::uint32_t start_epoch = 0) {
  validate(config);
  validate(net);
  if (data.train.empty()) fail(ErrorCode::EmptyInput, "training split is empty");
  AdamState adam = resume ? *resume : AdamState::for_network(net);
  Metrics metrics;
  std::vector<std::size_t> order(data.train.size());

  for (std::uint32_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config.schedule());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = named_rng(config.seed, "shuffle", {epoch});
    shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t end = std::min(order.size(), b + config.batch_size);
      const auto batch = std::span<const std::size_t>(order).subspan(b, end - b);
      const BatchOutcome out = run_batch(net, data.train, batch, config, epoch);
      adam_step(net, out.grads, adam, lr);
      loss_sum += out.loss;
      ++batches;
    }
    EpochMetrics em;
    em.epoch = epoch;
    em.lr = lr;
    em.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    if (config.eval_every_epoch || epoch + 1 == config.epochs) {
      const Metrics m = evaluate(net, data, config);
      em.acc_s = m.acc_s;
      em.acc_test = m.acc_test;
      em.acc_train = m.acc_train;
    }
    metrics.history.push_back(em);
    if (on_epoch) on_epoch(em, net, adam);
  }

  if (metrics.history.empty() || !config.eval_every_epoch) {
    const Metrics m = evaluate(net, data, config);
    metrics.acc_s = m.acc_s;
    metrics.acc_test = m.acc_test;
    metrics.acc_train = m.acc_train;
  } else {
    metrics.acc_s = metrics.history.back().acc_s;
    metrics.acc_test = metrics.history.back().acc_test;
    metrics.acc_train = metrics.history.back().acc_train;
  }
  return {std::move(net), std::move(adam), std::move(metrics)};
}

}  // namespace carsnn
