#pragma once

#include <string>
#include <string_view>

#include "carsnn/core/error.hpp"
#include "carsnn/events/synthetic.hpp"
#include "carsnn/snn/network.hpp"
#include "carsnn/stbp/train.hpp"

namespace carsnn {

/// A complete, reproducible experiment setting.
struct Preset {
  std::string name;
  Variant variant = Variant::Full128;
  double init_gain = 1.0;
  TrainConfig train;
  SyntheticSpec data;  // used when no dataset root is given
};

/// Full-scale setting: 128x128 input, 200 epochs, batch 40, 1 ms frames
/// over 10 ms clips, each held for 20 timesteps.
inline Preset full_preset() {
  Preset p;
  p.name = "full";
  return p;
}

/// Desk-scale run on the synthetic moving-bar data: 50x50 input,
/// 20 epochs, frames held for 10 timesteps (the chip's replication count).
/// Events are denser than the default synthetic rate and the initial
/// weights are scaled by 2 so that spikes reach the output layer at
/// initialisation; with the full-scale defaults the deep spiking pooling
/// stack starts silent on this data and no gradient flows.
inline Preset smoke_preset() {
  Preset p;
  p.name = "smoke";
  p.variant = Variant::Win50;
  p.init_gain = 2.0;
  p.train.epochs = 20;
  p.train.accumulation.frame_repeat = 10;
  p.train.seed = 1;
  p.data.width = 50;
  p.data.height = 50;
  p.data.n_per_class = 100;
  p.data.n_test_per_class = 100;
  p.data.event_rate = 600.0;
  p.data.pattern = SyntheticPattern::MovingBar;
  p.data.seed = 7;
  return p;
}

inline Preset preset_by_name(std::string_view name) {
  if (name == "full") return full_preset();
  if (name == "smoke") return smoke_preset();
  fail(ErrorCode::InvalidConfig, "unknown preset '" + std::string(name) + "' (expected full or smoke)");
}

}  // namespace carsnn
