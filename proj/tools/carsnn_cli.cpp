// carsnn: command-line front end for the event-camera SNN pipeline.
//
//   carsnn gen       write a synthetic dataset to disk
//   carsnn stats     event occurrence maps and densest attention windows
//   carsnn train     STBP training with checkpoints and a metrics log
//   carsnn eval      float-model accuracy on a dataset
//   carsnn quantize  translate a trained network to chip parameters
//   carsnn emulate   fixed-point chip emulation accuracy
//   carsnn map       compartment / synapse / core utilisation
//
// Exit codes: 0 success, 1 internal error, 2 usage / config / input error.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "carsnn/carsnn.hpp"
#include "json.hpp"

using namespace carsnn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kReportVersion = 1;

/// Usage or input problem; reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json report_header(const std::string& kind) { return {{"schema", "carsnn." + kind}, {"version", kReportVersion}}; }

/// Writes `j` to `path`, or to stdout when path is "-".
void emit(const json& j, const std::string& path) {
  if (path == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    io::write_text(path, j.dump(2) + "\n");
  }
}

// ---- --config expansion -----------------------------------------------------------
//
// The file is either a JSON object or "key = value" lines ('#' comments).
// Each entry becomes "--key=value" inserted before the user's own flags;
// every option keeps the last value given, so the command line wins.

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

std::vector<std::string> config_tokens(const std::string& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const Error& e) {
    throw UsageError("cannot read config file: " + e.message());
  }
  std::vector<std::string> out;
  auto add = [&](std::string key, const std::string& value) {
    for (auto& ch : key)
      if (ch == '_') ch = '-';
    out.push_back("--" + key + "=" + value);
  };
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw UsageError(path + ": invalid JSON config: " + e.what());
    }
    for (const auto& [k, v] : j.items()) {
      if (v.is_object()) throw UsageError(path + ": config key '" + k + "' must be a scalar or a list");
      if (v.is_array())
        for (const auto& x : v) add(k, scalar_text(x));
      else
        add(k, scalar_text(v));
    }
    return out;
  }
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(number) + ": expected 'key = value'");
    auto trim = [](std::string s) {
      const auto l = s.find_first_not_of(" \t\r\"");
      const auto r = s.find_last_not_of(" \t\r\"");
      return l == std::string::npos ? std::string() : s.substr(l, r - l + 1);
    };
    add(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

/// Returns argv with any --config file expanded in place after the subcommand.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file path");
      config = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!config) return args;
  auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) { return !a.empty() && a[0] != '-'; });
  if (sub == args.end()) throw UsageError("--config must be used with a subcommand");
  const auto extra = config_tokens(*config);
  args.insert(sub + 1, extra.begin(), extra.end());
  return args;
}

// ---- shared flag groups ------------------------------------------------------------

struct Common {
  std::string preset = "full";
  std::size_t threads = 1;
  std::string report;
};

void add_common(CLI::App* sub, Common& c, const std::string& report_help) {
  sub->add_option("--preset", c.preset, "Experiment preset: full (full-scale setting) or smoke (desk-scale)")
      ->capture_default_str()
      ->check(CLI::IsMember({"full", "smoke"}));
  sub->add_option("--threads", c.threads, "Worker threads; results do not depend on this")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--report", c.report, report_help);
  static std::string config_path;  // consumed before parsing; listed for --help
  sub->add_option("--config", config_path, "Config file (JSON object or key = value lines); flags override it");
}

/// Where the streams come from. --data, NCARS_ROOT and --synthetic are
/// mutually exclusive; NCARS_ROOT is used when neither flag is given.
struct DataFlags {
  std::string data;
  std::string format = "auto";
  bool synthetic = false;
  std::optional<std::uint32_t> n_per_class, n_test_per_class, width, height;
  std::optional<std::string> pattern;
  std::optional<double> event_rate;
  std::optional<std::uint64_t> data_seed;
};

void add_data(CLI::App* sub, DataFlags& d) {
  auto* data = sub->add_option("--data", d.data, "Dataset root with train/ and test/ splits (default: $NCARS_ROOT)");
  sub->add_option("--format", d.format, "Event file format under --data: dat, evtcsv, or auto (detect)")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "dat", "evtcsv"}));
  sub->add_flag("--synthetic", d.synthetic, "Use generated streams instead of a dataset on disk")->excludes(data);
  sub->add_option("--n-per-class", d.n_per_class, "Synthetic training streams per class (full: 100, smoke: 100)");
  sub->add_option("--n-test-per-class", d.n_test_per_class, "Synthetic test streams per class (default 100)");
  sub->add_option("--width", d.width, "Synthetic sensor width in pixels (default 50)");
  sub->add_option("--height", d.height, "Synthetic sensor height in pixels (default 50)");
  sub->add_option("--pattern", d.pattern, "Synthetic car pattern: moving_bar, blob or uniform_noise (default moving_bar)");
  sub->add_option("--event-rate", d.event_rate, "Synthetic events per millisecond (full: 150, smoke: 600)");
  sub->add_option("--data-seed", d.data_seed, "Seed of the synthetic generator (default 7)");
}

SyntheticSpec synthetic_spec(const DataFlags& d, const Preset& p) {
  SyntheticSpec s = p.data;
  if (d.n_per_class) s.n_per_class = *d.n_per_class;
  if (d.n_test_per_class) s.n_test_per_class = *d.n_test_per_class;
  if (d.width) s.width = *d.width;
  if (d.height) s.height = *d.height;
  if (d.pattern) s.pattern = parse_pattern(*d.pattern);
  if (d.event_rate) s.event_rate = *d.event_rate;
  if (d.data_seed) s.seed = *d.data_seed;
  return s;
}

/// Picks the format whose files appear first under train/background or
/// train/cars; falls back to dat so the loader reports what is missing.
std::string detect_format(const fs::path& root) {
  for (const char* cls : {"background", "cars"}) {
    const fs::path dir = root / "train" / cls;
    if (!fs::is_directory(dir)) continue;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (name.size() > 8 && name.compare(name.size() - 8, 8, ".evt.csv") == 0) return "evtcsv";
      if (name.size() > 4 && name.compare(name.size() - 4, 4, ".dat") == 0) return "dat";
    }
  }
  return "dat";
}

struct LoadedData {
  Dataset data;
  json source;
};

LoadedData load_data(const DataFlags& d, const Preset& p, std::size_t threads) {
  LoadedData out;
  if (d.synthetic) {
    const SyntheticSpec spec = synthetic_spec(d, p);
    out.data = gen_synthetic(spec);
    out.source = {{"kind", "synthetic"},
                  {"pattern", std::string(to_string(spec.pattern))},
                  {"width", spec.width},
                  {"height", spec.height},
                  {"seed", spec.seed}};
  } else {
    std::string root = d.data;
    if (root.empty())
      if (const char* env = std::getenv("NCARS_ROOT")) root = env;
    if (root.empty()) throw UsageError("no dataset given: pass --data DIR, set NCARS_ROOT, or use --synthetic");
    if (!fs::is_directory(root)) throw UsageError("no streams found: '" + root + "' is not a directory");
    const std::string format = d.format == "auto" ? detect_format(root) : d.format;
    try {
      out.data = load_dataset(root, parse_event_format(format), threads);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MissingSplit || e.code() == ErrorCode::EmptyClassDirectory)
        throw UsageError("no streams found under '" + root + "': " + e.message());
      throw;
    }
    out.source = {{"kind", "directory"}, {"root", root}, {"format", format}};
  }
  if (out.data.train.empty() && out.data.test.empty()) throw UsageError("no streams found");
  out.source["train_streams"] = out.data.train.size();
  out.source["test_streams"] = out.data.test.size();
  return out;
}

/// Training / evaluation settings. Unset values come from the preset.
struct TrainFlags {
  std::optional<std::uint32_t> epochs, batch_size, lr_halving, frame_repeat, window_x, window_y;
  std::optional<double> lr, init_gain, v_th, tau;
  std::optional<std::uint64_t> t_sample_us, t_length_us, seed;
  std::optional<std::string> variant, pooling;
  bool full_product = false;
};

void add_accumulation(CLI::App* sub, TrainFlags& t) {
  sub->add_option("--t-sample-us", t.t_sample_us, "Frame accumulation time T_s in microseconds (default 1000)");
  sub->add_option("--t-length-us", t.t_length_us, "Clip length T_l in microseconds (default 10000)");
  sub->add_option("--frame-repeat", t.frame_repeat, "Timesteps each frame is held at the input (full: 20, smoke: 10)");
  sub->add_option("--seed", t.seed, "Seed for shuffling, clip selection and initialisation (default 1)");
  sub->add_option("--window-x", t.window_x, "Left edge of the input window in sensor pixels (default 0)");
  sub->add_option("--window-y", t.window_y, "Bottom edge of the input window in sensor pixels (default 0)");
}

void add_training(CLI::App* sub, TrainFlags& t) {
  sub->add_option("--variant", t.variant, "Network: full128, win100 or win50 (full: full128, smoke: win50)");
  sub->add_option("--pooling", t.pooling, "Pooling layers: spiking or linear (default spiking)");
  sub->add_option("--epochs", t.epochs, "Training epochs (full: 200, smoke: 20)");
  sub->add_option("--batch-size", t.batch_size, "Streams per batch (default 40)");
  sub->add_option("--lr", t.lr, "Initial Adam learning rate (default 1e-3)");
  sub->add_option("--lr-halving", t.lr_halving, "Halve the learning rate every N epochs (default 20)");
  sub->add_option("--init-gain", t.init_gain, "Scale of the initial weights (full: 1, smoke: 2)");
  sub->add_option("--v-th", t.v_th, "Firing threshold of every neuron (default 0.4)");
  sub->add_option("--tau", t.tau, "Membrane decay factor per timestep (default 0.2)");
  sub->add_flag("--full-product", t.full_product, "Also propagate gradients through the reset term's spike input");
  add_accumulation(sub, t);
}

TrainConfig train_config(const TrainFlags& t, const Preset& p, std::size_t threads) {
  TrainConfig c = p.train;
  if (t.epochs) c.epochs = *t.epochs;
  if (t.batch_size) c.batch_size = *t.batch_size;
  if (t.lr) c.lr_initial = *t.lr;
  if (t.lr_halving) c.lr_halving_period_epochs = *t.lr_halving;
  if (t.t_sample_us) c.accumulation.t_sample_us = *t.t_sample_us;
  if (t.t_length_us) c.accumulation.t_length_us = *t.t_length_us;
  if (t.frame_repeat) c.accumulation.frame_repeat = *t.frame_repeat;
  if (t.seed) c.seed = *t.seed;
  if (t.window_x) c.window_x = *t.window_x;
  if (t.window_y) c.window_y = *t.window_y;
  c.full_product_rule = c.full_product_rule || t.full_product;
  c.threads = threads;
  validate(c);
  return c;
}

json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr_initial", c.lr_initial},
          {"lr_halving_period_epochs", c.lr_halving_period_epochs},
          {"t_sample_us", c.accumulation.t_sample_us},
          {"t_length_us", c.accumulation.t_length_us},
          {"frame_repeat", c.accumulation.frame_repeat},
          {"seed", c.seed},
          {"window_x", c.window_x},
          {"window_y", c.window_y},
          {"full_product_rule", c.full_product_rule}};
}

json split_json(const SplitAccuracy& a) {
  return {{"frames", a.frames},
          {"frames_correct", a.frames_correct},
          {"streams", a.streams},
          {"streams_correct", a.streams_correct},
          {"frame_accuracy", a.frame_accuracy()},
          {"stream_accuracy", a.stream_accuracy()}};
}

/// Reads either a float network or a quantized network file.
struct AnyModel {
  std::optional<NetworkSpec> network;
  std::optional<QuantizedNetwork> quantized;
};

AnyModel load_any_model(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw UsageError(path + ": not a JSON model file: " + e.what());
  }
  const std::string format = j.value("format", "");
  AnyModel m;
  if (format == kNetworkFormat)
    m.network = load_network(path);
  else if (format == kQuantizedFormat)
    m.quantized = load_quantized(path);
  else
    throw UsageError(path + ": unknown model format '" + format + "'");
  return m;
}

// ---- quantize options --------------------------------------------------------------

struct QuantFlags {
  double scale = 25.0;
  std::string encoding = "auto";
  std::string policy = "per-layer";
  std::string rounding = "toward-zero";
  std::int32_t delta_i = kDecayOne;
  std::optional<std::int32_t> delta_v;
};

void add_quant(CLI::App* sub, QuantFlags& q) {
  sub->add_option("--scale", q.scale, "Multiplier applied to weights and threshold")->capture_default_str();
  sub->add_option("--encoding", q.encoding, "Weight mantissa grid: auto (step 2 when signs mix) or step1")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "step1"}));
  sub->add_option("--wgt-exp-policy", q.policy, "Weight exponent: fixed (0 everywhere) or per-layer")
      ->capture_default_str()
      ->check(CLI::IsMember({"fixed", "per-layer"}));
  sub->add_option("--rounding", q.rounding, "Decay multiply rounding: toward-zero or floor")
      ->capture_default_str()
      ->check(CLI::IsMember({"toward-zero", "floor"}));
  sub->add_option("--delta-i", q.delta_i, "Current decay in 1/4096 units (4096 renews the current every step)")
      ->capture_default_str()
      ->check(CLI::Range(0, kDecayOne));
  sub->add_option("--delta-v", q.delta_v, "Voltage decay override in 1/4096 units (default derived from tau: 3276)")
      ->check(CLI::Range(0, kDecayOne));
}

QuantizeOptions quant_options(const QuantFlags& q) {
  QuantizeOptions o;
  o.scale = q.scale;
  o.encoding = parse_weight_encoding(q.encoding);
  o.wgt_exp_policy = parse_wgt_exp_policy(q.policy);
  o.rounding = parse_decay_rounding(q.rounding);
  o.delta_i = q.delta_i;
  o.delta_v = q.delta_v;
  return o;
}

json quantized_summary(const QuantizedNetwork& q) {
  json layers = json::array();
  for (std::size_t n = 0; n < q.layers.size(); ++n) {
    const auto& l = q.layers[n];
    json lj = {{"kind", std::string(to_string(l.geometry.kind))},
               {"wgt_exp", l.wgt_exp},
               {"encoding", {{"lo", l.encoding.lo}, {"hi", l.encoding.hi}, {"step", l.encoding.step}}}};
    if (l.geometry.kind == LayerKind::AvgPool) lj["pool_weight"] = l.pool_weight;
    if (n < q.stats.size()) {
      const auto& s = q.stats[n];
      lj["weights"] = s.count;
      lj["max_abs_error"] = s.max_abs_error;
      lj["mean_abs_error"] = s.mean_abs_error;
      lj["min_mantissa"] = s.min_mantissa;
      lj["max_mantissa"] = s.max_mantissa;
    }
    layers.push_back(std::move(lj));
  }
  return {{"scale", q.scale},
          {"vth_mant", q.vth_mant},
          {"threshold", q.threshold()},
          {"delta_v", q.delta_v},
          {"delta_i", q.delta_i},
          {"rounding", std::string(to_string(q.rounding))},
          {"layers", std::move(layers)}};
}

// ---- subcommands --------------------------------------------------------------------

int cmd_gen(const Common& c, const DataFlags& d, const std::string& out) {
  const Preset p = preset_by_name(c.preset);
  const SyntheticSpec spec = synthetic_spec(d, p);
  const Dataset data = gen_synthetic(spec);
  write_dataset(data, out);
  json r = report_header("gen-report");
  r["out"] = out;
  r["format"] = "evtcsv";
  r["pattern"] = std::string(to_string(spec.pattern));
  r["width"] = spec.width;
  r["height"] = spec.height;
  r["seed"] = spec.seed;
  r["train_streams"] = data.train.size();
  r["test_streams"] = data.test.size();
  emit(r, c.report.empty() ? (fs::path(out) / "gen_report.json").string() : c.report);
  std::fprintf(stderr, "wrote %zu + %zu streams to %s\n", data.train.size(), data.test.size(), out.c_str());
  return 0;
}

int cmd_stats(const Common& c, const DataFlags& d, const std::string& out) {
  const Preset p = preset_by_name(c.preset);
  const LoadedData ld = load_data(d, p, c.threads);
  fs::create_directories(out);
  json r = report_header("stats-report");
  r["dataset"] = ld.source;
  const bool table_to_stdout = c.report != "-";
  FILE* text = table_to_stdout ? stdout : stderr;
  json splits = json::object();
  for (auto [name, streams] : {std::pair{"train", &ld.data.train}, std::pair{"test", &ld.data.test}}) {
    if (streams->empty()) continue;
    const OccurrenceMap m = event_occurrence_map(*streams);
    const fs::path csv = fs::path(out) / (std::string("occurrence_") + name + ".csv");
    const fs::path pgm = fs::path(out) / (std::string("occurrence_") + name + ".pgm");
    io::write_text(csv, occurrence_csv(m));
    io::write_file(pgm, occurrence_pgm(m));
    std::uint64_t events = 0, cars = 0;
    for (const auto& s : *streams) {
      events += s.events.size();
      cars += (s.label && *s.label == kCar) ? 1 : 0;
    }
    json windows = json::array();
    std::fprintf(text, "%s: %zu streams, %llu events, canvas %ux%u\n", name, streams->size(),
                 static_cast<unsigned long long>(events), m.width, m.height);
    for (std::uint32_t size : {50u, 100u}) {
      const auto tiles = tile_shares(m, size);
      const auto& best = tiles.front();
      const bool bottom_left = best.window.origin_x == 0 && best.window.origin_y == 0;
      std::fprintf(text, "  densest %ux%u window: x=%u y=%u share=%.4f%s\n", size, size, best.window.origin_x,
                   best.window.origin_y, best.share, bottom_left ? " (bottom-left)" : "");
      json tiles_json = json::array();
      for (const auto& t : tiles)
        tiles_json.push_back({{"x", t.window.origin_x}, {"y", t.window.origin_y}, {"events", t.events}, {"share", t.share}});
      windows.push_back({{"size", size},
                         {"best", {{"x", best.window.origin_x}, {"y", best.window.origin_y}, {"share", best.share}}},
                         {"bottom_left_is_densest", bottom_left},
                         {"tiles", std::move(tiles_json)}});
    }
    splits[name] = {{"streams", streams->size()},
                    {"cars", cars},
                    {"background", streams->size() - cars},
                    {"events", events},
                    {"mean_events_per_stream", static_cast<double>(events) / static_cast<double>(streams->size())},
                    {"canvas", {{"width", m.width}, {"height", m.height}}},
                    {"occurrence_csv", csv.string()},
                    {"occurrence_pgm", pgm.string()},
                    {"windows", std::move(windows)}};
  }
  r["splits"] = std::move(splits);
  emit(r, c.report.empty() ? (fs::path(out) / "stats_report.json").string() : c.report);
  return 0;
}

int cmd_train(const Common& c, const DataFlags& d, const TrainFlags& t, const std::string& out,
              std::uint32_t checkpoint_every, const std::string& resume) {
  const Preset p = preset_by_name(c.preset);
  const TrainConfig cfg = train_config(t, p, c.threads);
  const Variant variant = t.variant ? parse_variant(*t.variant) : p.variant;
  const PoolingMode pooling = t.pooling ? parse_pooling(*t.pooling) : PoolingMode::Spiking;
  const double gain = t.init_gain ? *t.init_gain : p.init_gain;
  const LoadedData ld = load_data(d, p, c.threads);
  if (ld.data.train.empty()) throw UsageError("no streams found in the training split");

  NetworkSpec net;
  std::optional<AdamState> adam;
  std::uint32_t start_epoch = 0;
  if (!resume.empty()) {
    LoadedCheckpoint ck = load_checkpoint(resume);
    net = std::move(ck.network);
    adam = std::move(ck.adam);
    start_epoch = ck.epoch + 1;
  } else {
    LifParams lif;
    if (t.v_th) lif.v_th = *t.v_th;
    if (t.tau) lif.tau = *t.tau;
    net = build_network(variant, cfg.seed, lif, pooling, gain);
  }

  fs::create_directories(out);
  const fs::path metrics_path = fs::path(out) / "metrics.jsonl";
  std::ofstream metrics(metrics_path, resume.empty() ? std::ios::trunc : std::ios::app);
  if (!metrics) throw UsageError("cannot write " + metrics_path.string());
  std::vector<std::string> checkpoints;
  const TrainResult r = train(
      ld.data, net, cfg,
      [&](const EpochMetrics& m, const NetworkSpec& n, const AdamState& a) {
        metrics << metrics_line(m) << "\n" << std::flush;
        std::fprintf(stderr, "epoch %u lr=%.3g loss=%.5f acc_s=%.4f acc_test=%.4f acc_train=%.4f\n", m.epoch, m.lr,
                     m.loss, m.acc_s, m.acc_test, m.acc_train);
        const bool last = m.epoch + 1 == cfg.epochs;
        if (checkpoint_every > 0 && ((m.epoch + 1) % checkpoint_every == 0 || last))
          checkpoints.push_back(save_checkpoint(fs::path(out) / "checkpoints", m.epoch, n, a).network.string());
      },
      adam ? &*adam : nullptr, start_epoch);
  const fs::path model = fs::path(out) / "model.json";
  save_network(r.network, model);

  json rep = report_header("train-report");
  rep["preset"] = p.name;
  rep["variant"] = std::string(to_string(r.network.variant));
  rep["pooling"] = std::string(to_string(r.network.pooling));
  rep["parameters"] = r.network.parameter_count();
  rep["config"] = train_config_json(cfg);
  rep["dataset"] = ld.source;
  rep["start_epoch"] = start_epoch;
  rep["epochs_run"] = r.metrics.history.size();
  rep["final"] = {{"acc_s", r.metrics.acc_s}, {"acc_test", r.metrics.acc_test}, {"acc_train", r.metrics.acc_train}};
  rep["final"]["loss"] = r.metrics.history.empty() ? 0.0 : r.metrics.history.back().loss;
  rep["model"] = model.string();
  rep["metrics"] = metrics_path.string();
  rep["checkpoints"] = checkpoints;
  emit(rep, c.report.empty() ? (fs::path(out) / "train_report.json").string() : c.report);
  return 0;
}

int cmd_eval(const Common& c, const DataFlags& d, const TrainFlags& t, const std::string& model_path) {
  const Preset p = preset_by_name(c.preset);
  const TrainConfig cfg = train_config(t, p, c.threads);
  const NetworkSpec net = load_network(model_path);
  const LoadedData ld = load_data(d, p, c.threads);
  const SplitAccuracy test = evaluate_split(net, ld.data.test, cfg, kTestSplit);
  const SplitAccuracy tr = evaluate_split(net, ld.data.train, cfg, kTrainSplit);
  json r = report_header("eval-report");
  r["model"] = model_path;
  r["dataset"] = ld.source;
  r["config"] = train_config_json(cfg);
  r["acc_s"] = test.frame_accuracy();
  r["acc_test"] = test.stream_accuracy();
  r["acc_train"] = tr.stream_accuracy();
  r["test"] = split_json(test);
  r["train"] = split_json(tr);
  emit(r, c.report.empty() ? "-" : c.report);
  return 0;
}

int cmd_quantize(const Common& c, const QuantFlags& qf, const std::string& model_path, const std::string& out) {
  const NetworkSpec net = load_network(model_path);
  const QuantizedNetwork q = quantize(net, quant_options(qf));
  if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  save_quantized(q, out);
  json r = report_header("quantize-report");
  r["model"] = model_path;
  r["out"] = out;
  r["encoding"] = qf.encoding;
  r["wgt_exp_policy"] = qf.policy;
  r["quantized"] = quantized_summary(q);
  emit(r, c.report.empty() ? "-" : c.report);
  return 0;
}

int cmd_emulate(const Common& c, const DataFlags& d, const TrainFlags& t, const QuantFlags& qf,
                const std::string& model_path, const EmulationConfig& emu, bool skip_train) {
  const Preset p = preset_by_name(c.preset);
  const TrainConfig cfg = train_config(t, p, c.threads);
  validate(emu);
  AnyModel m = load_any_model(model_path);
  const QuantizedNetwork q = m.quantized ? *m.quantized : quantize(*m.network, quant_options(qf));
  const LoadedData ld = load_data(d, p, c.threads);
  const SplitAccuracy test = emulate_split(q, ld.data.test, cfg, emu, kTestSplit);
  json r = report_header("emulate-report");
  r["model"] = model_path;
  r["dataset"] = ld.source;
  r["replication"] = emu.replication;
  r["blank"] = emu.blank;
  r["timesteps_per_inference"] = emu.timesteps_per_inference();
  r["acc_s"] = test.frame_accuracy();
  r["acc_test"] = test.stream_accuracy();
  r["test"] = split_json(test);
  if (!skip_train) {
    const SplitAccuracy tr = emulate_split(q, ld.data.train, cfg, emu, kTrainSplit);
    r["acc_train"] = tr.stream_accuracy();
    r["train"] = split_json(tr);
  }
  r["quantized"] = quantized_summary(q);
  std::fprintf(stderr, "acc_s=%.4f acc_test=%.4f timesteps/inference=%u\n", test.frame_accuracy(),
               test.stream_accuracy(), emu.timesteps_per_inference());
  emit(r, c.report.empty() ? "-" : c.report);
  return 0;
}

int cmd_map(const Common& c, const std::string& model_path, const std::optional<std::string>& variant,
            const ChipConstraints& limits, bool per_core) {
  std::vector<LayerGeometry> layers;
  std::string source;
  if (!model_path.empty()) {
    const AnyModel m = load_any_model(model_path);
    if (m.quantized)
      for (const auto& l : m.quantized->layers) layers.push_back(l.geometry);
    else
      for (const auto& l : m.network->layers) layers.push_back(l.geometry);
    source = model_path;
  } else {
    const Variant v = parse_variant(variant.value_or("full128"));
    for (const auto& l : build_network(v, 1).layers) layers.push_back(l.geometry);
    source = std::string(to_string(v));
  }
  validate(limits);
  const MappingReport r = map_layers(layers, limits);

  FILE* text = c.report == "-" ? stderr : stdout;
  std::fprintf(text, "%-6s %-8s %22s %12s %12s %8s\n", "layer", "kind", "output", "compartments", "synapses", "cores");
  for (std::size_t n = 0; n < r.layers.size(); ++n) {
    const auto& l = r.layers[n];
    std::fprintf(text, "%-6zu %-8s %22s %12llu %12llu %8llu\n", n, l.kind.c_str(), to_string(layers[n].out).c_str(),
                 static_cast<unsigned long long>(l.compartments), static_cast<unsigned long long>(l.synapses),
                 static_cast<unsigned long long>(l.cores));
  }
  std::fprintf(text, "%-6s %-8s %22s %12llu %12llu %8llu\n", "total", "", "",
               static_cast<unsigned long long>(r.total_compartments), static_cast<unsigned long long>(r.total_synapses),
               static_cast<unsigned long long>(r.cores_used));
  std::fprintf(text, "lower bound on cores: %llu; feasible: %s\n", static_cast<unsigned long long>(r.lower_bound_cores),
               r.feasible ? "yes" : "no");
  for (const auto& v : r.violations) std::fprintf(text, "  violation: %s\n", v.c_str());

  json j = report_header("map-report");
  j["source"] = source;
  j["limits"] = {{"max_compartments_per_core", limits.max_compartments_per_core},
                 {"max_fanin_per_core", limits.max_fanin_per_core},
                 {"max_fanout_per_core", limits.max_fanout_per_core},
                 {"synaptic_mem_per_core", limits.synaptic_mem_per_core},
                 {"bytes_per_synapse", limits.bytes_per_synapse}};
  j["total_compartments"] = r.total_compartments;
  j["total_synapses"] = r.total_synapses;
  j["cores_used"] = r.cores_used;
  j["lower_bound_cores"] = r.lower_bound_cores;
  j["feasible"] = r.feasible;
  j["violations"] = r.violations;
  json lj = json::array();
  for (const auto& l : r.layers)
    lj.push_back({{"kind", l.kind}, {"compartments", l.compartments}, {"synapses", l.synapses}, {"cores", l.cores}});
  j["layers"] = std::move(lj);
  if (per_core) {
    json cj = json::array();
    for (const auto& core : r.cores)
      cj.push_back({{"layer", core.layer},
                    {"first_neuron", core.first_neuron},
                    {"compartments", core.compartments},
                    {"fan_in", core.fan_in},
                    {"fan_out", core.fan_out},
                    {"synapses", core.synapses},
                    {"synaptic_memory", core.synaptic_memory}});
    j["cores"] = std::move(cj);
  }
  if (!c.report.empty()) emit(j, c.report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  CLI::App app{"Spiking CNN pipeline for event-camera car recognition"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", "carsnn 1.0");

  Common common;
  DataFlags data;
  TrainFlags tf;
  QuantFlags qf;
  std::string out, model;
  std::uint32_t checkpoint_every = 10;
  std::string resume;
  EmulationConfig emu;
  bool skip_train = false, per_core = false;
  std::optional<std::string> map_variant;
  ChipConstraints limits;

  auto* gen = app.add_subcommand("gen", "Write a synthetic dataset (train/test x background/cars)");
  add_common(gen, common, "Report path, '-' for stdout (default OUT/gen_report.json)");
  gen->add_option("--out", out, "Output dataset root")->required();
  gen->add_option("--n-per-class", data.n_per_class, "Training streams per class (default 100)");
  gen->add_option("--n-test-per-class", data.n_test_per_class, "Test streams per class (default 100)");
  gen->add_option("--width", data.width, "Sensor width in pixels (default 50)");
  gen->add_option("--height", data.height, "Sensor height in pixels (default 50)");
  gen->add_option("--pattern", data.pattern, "Car pattern: moving_bar, blob or uniform_noise (default moving_bar)");
  gen->add_option("--event-rate", data.event_rate, "Events per millisecond (full: 150, smoke: 600)");
  gen->add_option("--data-seed", data.data_seed, "Generator seed (default 7)");

  auto* stats = app.add_subcommand("stats", "Occurrence maps (CSV + PGM) and densest 50x50 / 100x100 windows");
  add_common(stats, common, "Report path, '-' for stdout (default OUT/stats_report.json)");
  add_data(stats, data);
  stats->add_option("--out", out, "Directory for the occurrence maps")->required();

  auto* trn = app.add_subcommand("train", "Train with STBP and Adam");
  add_common(trn, common, "Report path, '-' for stdout (default OUT/train_report.json)");
  add_data(trn, data);
  add_training(trn, tf);
  trn->add_option("--out", out, "Output directory (model.json, metrics.jsonl, checkpoints/)")->required();
  trn->add_option("--checkpoint-every", checkpoint_every, "Checkpoint every N epochs (0 disables)")
      ->capture_default_str();
  trn->add_option("--resume", resume, "Continue from a checkpoint JSON written by an earlier run")
      ->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("eval", "Float-model accuracy on both splits");
  add_common(ev, common, "Report path (default stdout)");
  add_data(ev, data);
  add_accumulation(ev, tf);
  ev->add_option("--model", model, "Network JSON")->required()->check(CLI::ExistingFile);

  auto* qz = app.add_subcommand("quantize", "Translate a trained network to fixed-point chip parameters");
  add_common(qz, common, "Report path (default stdout)");
  add_quant(qz, qf);
  qz->add_option("--model", model, "Network JSON")->required()->check(CLI::ExistingFile);
  qz->add_option("--out", out, "Quantized network JSON to write")->required();

  auto* em = app.add_subcommand("emulate", "Accuracy of the fixed-point chip emulation");
  add_common(em, common, "Report path (default stdout)");
  add_data(em, data);
  add_accumulation(em, tf);
  add_quant(em, qf);
  em->add_option("--model", model, "Quantized network JSON, or a float network (quantized with the flags above)")
      ->required()
      ->check(CLI::ExistingFile);
  em->add_option("--replication", emu.replication, "Timesteps each frame is held at the chip input")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  em->add_option("--blank", emu.blank, "Zero-input timesteps after each frame")->capture_default_str();
  em->add_flag("--skip-train", skip_train, "Only emulate the test split");

  auto* mp = app.add_subcommand("map", "Compartment, synapse and core utilisation");
  add_common(mp, common, "JSON report path, '-' for stdout (table then goes to stderr)");
  auto* mp_model = mp->add_option("--model", model, "Network or quantized network JSON")->check(CLI::ExistingFile);
  mp->add_option("--variant", map_variant, "Map an untrained network of this variant instead (default full128)")
      ->excludes(mp_model);
  mp->add_option("--max-compartments", limits.max_compartments_per_core, "Compartments per core")
      ->capture_default_str();
  mp->add_option("--max-fanin", limits.max_fanin_per_core, "Distinct presynaptic neurons per core")
      ->capture_default_str();
  mp->add_option("--max-fanout", limits.max_fanout_per_core, "Outgoing core links per core")->capture_default_str();
  mp->add_option("--synaptic-mem", limits.synaptic_mem_per_core, "Synaptic memory per core in bytes")
      ->capture_default_str();
  mp->add_option("--bytes-per-synapse", limits.bytes_per_synapse, "Bytes of synaptic memory per synapse")
      ->capture_default_str();
  mp->add_flag("--per-core", per_core, "Include every core in the JSON report");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen(common, data, out);
    if (*stats) return cmd_stats(common, data, out);
    if (*trn) return cmd_train(common, data, tf, out, checkpoint_every, resume);
    if (*ev) return cmd_eval(common, data, tf, model);
    if (*qz) return cmd_quantize(common, qf, model, out);
    if (*em) return cmd_emulate(common, data, tf, qf, model, emu, skip_train);
    if (*mp) return cmd_map(common, model, map_variant, limits, per_core);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(to_string(e.code())).c_str(), e.message().c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 2;
}
