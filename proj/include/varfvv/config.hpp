#pragma once

// Key-value configuration for experiments.
//
// File format: one "key = value" per line, '#' starts a comment, and a
// "[section]" line prefixes the following keys with "section.". So
//
//   [allocator]
//   eta = 1
//
// sets "allocator.eta". Command-line overrides use the dotted form directly.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "varfvv/error.hpp"
#include "varfvv/experiment.hpp"

namespace varfvv {

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

namespace config_detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) fail(ErrorCode::Config, key + ": '" + v + "' is not a number");
  return out;
}

inline long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) fail(ErrorCode::Config, key + ": '" + v + "' is not an integer");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorCode::Config, key + ": '" + v + "' is not a boolean");
}

/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
ConfigKey real(std::string name, std::string help, T ExperimentConfig::*group, double T::*field) {
  return {name, std::move(help), [=](ExperimentConfig& c, const std::string& v) { c.*group.*field = to_double(name, v); },
          [=](const ExperimentConfig& c) { return fmt(c.*group.*field); }};
}

template <class T, class I>
ConfigKey integer(std::string name, std::string help, T ExperimentConfig::*group, I T::*field) {
  return {name, std::move(help),
          [=](ExperimentConfig& c, const std::string& v) { c.*group.*field = static_cast<I>(to_int(name, v)); },
          [=](const ExperimentConfig& c) { return std::to_string(c.*group.*field); }};
}

}  // namespace config_detail

/// Every recognised key, in documentation order.
inline const std::vector<ConfigKey>& config_schema() {
  using namespace config_detail;
  using C = ExperimentConfig;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(integer("stream.n_views", "number of camera views N", &C::stream, &StreamConfig::n_views));
    k.push_back(integer("stream.fps", "frames per second", &C::stream, &StreamConfig::fps));
    k.push_back(real("stream.chunk_seconds", "chunk duration T_d in seconds", &C::stream, &StreamConfig::chunk_seconds));
    k.push_back(integer("stream.gop_constant", "GoP of the view-constant representation", &C::stream,
                        &StreamConfig::gop_constant));
    k.push_back(integer("stream.gop_switching", "GoP of the view-switching representation", &C::stream,
                        &StreamConfig::gop_switching));
    k.push_back(integer("stream.i_to_p_ratio", "I-frame size as a multiple of a P-frame", &C::stream,
                        &StreamConfig::i_to_p_ratio));

    k.push_back(real("allocator.eta", "constant-view quality scale (Mbit)", &C::qoe, &QoeParams::eta));
    k.push_back(real("allocator.eta_hat", "switching-view quality scale (Mbit)", &C::qoe, &QoeParams::eta_hat));
    k.push_back(real("allocator.mu1", "inter-view switching weight", &C::qoe, &QoeParams::mu1));
    k.push_back(real("allocator.mu2", "temporal switching weight", &C::qoe, &QoeParams::mu2));
    k.push_back(real("allocator.mu3", "weight of adjacent switching-rate jumps", &C::qoe, &QoeParams::mu3));
    k.push_back(real("allocator.epsilon", "relative budget tolerance", &C::qoe, &QoeParams::epsilon));
    k.push_back(real("allocator.lambda_min", "lower multiplier bracket", &C::qoe, &QoeParams::lambda_min));
    k.push_back(real("allocator.lambda_max", "upper multiplier bracket", &C::qoe, &QoeParams::lambda_max));
    k.push_back(integer("allocator.max_iterations", "bisection iteration cap", &C::qoe, &QoeParams::max_iterations));
    k.push_back({"allocator.coupling", "rate solve per multiplier: full or printed",
                 [](C& c, const std::string& v) {
                   if (v == "full")
                     c.qoe.coupling = Coupling::Full;
                   else if (v == "printed")
                     c.qoe.coupling = Coupling::AsPrinted;
                   else
                     fail(ErrorCode::Config, "allocator.coupling: expected full or printed");
                 },
                 [](const C& c) { return std::string(c.qoe.coupling == Coupling::Full ? "full" : "printed"); }});
    k.push_back({"allocator.sw", "budget sliding window (chunks)",
                 [](C& c, const std::string& v) { c.sw = static_cast<int>(to_int("allocator.sw", v)); },
                 [](const C& c) { return std::to_string(c.sw); }});
    k.push_back({"allocator.r_tar", "target rate over all representations, Mbit/s (0: 10 x N)",
                 [](C& c, const std::string& v) { c.r_tar = to_double("allocator.r_tar", v); },
                 [](const C& c) { return fmt(c.r_tar); }});
    k.push_back({"allocator.t_d", "chunk duration in seconds (same as stream.chunk_seconds)",
                 [](C& c, const std::string& v) { c.stream.chunk_seconds = to_double("allocator.t_d", v); },
                 [](const C& c) { return fmt(c.stream.chunk_seconds); }});
    k.push_back({"allocator.bounds", "rate box as lo,hi multiples of the fair share R_avg/2N",
                 [](C& c, const std::string& v) {
                   const auto comma = v.find(',');
                   if (comma == std::string::npos) fail(ErrorCode::Config, "allocator.bounds: expected lo,hi");
                   c.bound_lo = to_double("allocator.bounds", trim(v.substr(0, comma)));
                   c.bound_hi = to_double("allocator.bounds", trim(v.substr(comma + 1)));
                 },
                 [](const C& c) { return fmt(c.bound_lo) + "," + fmt(c.bound_hi); }});

    k.push_back(integer("gnn.tau", "history length (chunks)", &C::train, &TrainConfig::tau));
    k.push_back(integer("gnn.horizon", "prediction horizon (chunks)", &C::train, &TrainConfig::horizon));
    k.push_back(integer("gnn.cheb_order", "Chebyshev order M", &C::train, &TrainConfig::cheb_order));
    k.push_back(integer("gnn.blocks", "stacked spatial-temporal blocks", &C::train, &TrainConfig::blocks));
    k.push_back(real("gnn.learning_rate", "optimizer step size", &C::train, &TrainConfig::learning_rate));
    k.push_back(integer("gnn.batch_size", "mini-batch size", &C::train, &TrainConfig::batch_size));
    k.push_back(integer("gnn.epochs", "initial training epochs", &C::train, &TrainConfig::epochs));
    k.push_back(integer("gnn.online_epochs", "passes per new chunk", &C::train, &TrainConfig::online_epochs));
    k.push_back(integer("gnn.online_window", "samples kept for online updates", &C::train, &TrainConfig::online_window));
    k.push_back(real("gnn.value_scale", "input/target scale (0: N)", &C::train, &TrainConfig::value_scale));
    k.push_back({"gnn.warmup_chunks", "chunks observed before the initial fit",
                 [](C& c, const std::string& v) { c.warmup_chunks = static_cast<int>(to_int("gnn.warmup_chunks", v)); },
                 [](const C& c) { return std::to_string(c.warmup_chunks); }});
    k.push_back({"gnn.adjacency", "edge-list CSV of the camera graph (empty: linear rig)",
                 [](C& c, const std::string& v) { c.adjacency = v; }, [](const C& c) { return c.adjacency; }});

    k.push_back({"traffic.model", "behavior model: low, high or mixed",
                 [](C& c, const std::string& v) { c.model.kind = parse_interactivity(v); },
                 [](const C& c) { return to_string(c.model.kind); }});
    k.push_back({"traffic.users", "number of users",
                 [](C& c, const std::string& v) { c.n_users = static_cast<int>(to_int("traffic.users", v)); },
                 [](const C& c) { return std::to_string(c.n_users); }});
    k.push_back({"traffic.chunks", "experiment length (chunks)",
                 [](C& c, const std::string& v) { c.chunks = static_cast<int>(to_int("traffic.chunks", v)); },
                 [](const C& c) { return std::to_string(c.chunks); }});
    k.push_back({"traffic.low_dwell", "mean dwell of low-interactivity users (chunks)",
                 [](C& c, const std::string& v) { c.model.low.mean_dwell_chunks = to_double("traffic.low_dwell", v); },
                 [](const C& c) { return fmt(c.model.low.mean_dwell_chunks); }});
    k.push_back({"traffic.high_dwell", "mean dwell of high-interactivity users (chunks)",
                 [](C& c, const std::string& v) { c.model.high.mean_dwell_chunks = to_double("traffic.high_dwell", v); },
                 [](const C& c) { return fmt(c.model.high.mean_dwell_chunks); }});
    k.push_back(real("traffic.high_share", "share of high-interactivity users in mixed traffic", &C::model,
                     &BehaviorModel::high_share));
    k.push_back(real("traffic.zipf", "Zipf exponent of target views around the hotspot (0: random sweeps)",
                     &C::model, &BehaviorModel::zipf));
    k.push_back(integer("traffic.hotspot", "hotspot view (0: centre)", &C::model, &BehaviorModel::hotspot));
    k.push_back(integer("traffic.burst_period", "chunks between hotspot jumps (0: none)", &C::model,
                        &BehaviorModel::burst_period));
    k.push_back({"traffic.traces", "trace CSV to replay instead of generating traffic",
                 [](C& c, const std::string& v) { c.traces = v; }, [](const C& c) { return c.traces; }});

    k.push_back({"run.scheme", "allocation streamed to users: adaptive, ppc-only, gnn-only, uniform",
                 [](C& c, const std::string& v) { c.scheme = parse_scheme(v); },
                 [](const C& c) { return to_string(c.scheme); }});
    k.push_back({"run.compare", "also evaluate every other scheme",
                 [](C& c, const std::string& v) { c.compare_schemes = to_bool("run.compare", v); },
                 [](const C& c) { return std::string(c.compare_schemes ? "true" : "false"); }});
    k.push_back({"run.seed", "seed for traffic and model initialisation",
                 [](C& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(to_int("run.seed", v)); },
                 [](const C& c) { return std::to_string(c.seed); }});
    return k;
  }();
  return keys;
}

inline void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_schema())
    if (k.name == key) {
      k.set(cfg, config_detail::trim(value));
      return;
    }
  fail(ErrorCode::Config, "unknown configuration key '" + key + "'");
}

/// Applies one "key=value" override.
inline void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(ErrorCode::Config, "override '" + assignment + "' is not key=value");
  set_config_value(cfg, config_detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

inline void load_config(ExperimentConfig& cfg, std::istream& in, const std::string& name = "config") {
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorCode::Config, name + ":" + std::to_string(line_no) + ": bad section header");
      section = config_detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Config, name + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = config_detail::trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    try {
      set_config_value(cfg, key, line.substr(eq + 1));
    } catch (const Error& e) {
      fail(e.code(), name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void load_config(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open config file " + path);
  load_config(cfg, in, path);
}

/// Current values of every key, in schema order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : config_schema()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

}  // namespace varfvv
