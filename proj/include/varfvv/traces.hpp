#pragma once

// User view traces: synthetic generation and the CSV ingest format.
//
// CSV schema (header "user_id,join_pts,request_pts,target_view"):
//   uid,join,,          join row (empty request and target)
//   uid,join,join,v     initial view (request_pts == join_pts); view 1 if absent
//   uid,join,r,v        switch request at pts r > join to view v
// Rows of one user must have strictly increasing request_pts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "varfvv/edge_session.hpp"
#include "varfvv/error.hpp"

namespace varfvv {

struct ViewTrace {
  int user_id = 0;
  std::int64_t join_pts = 0;
  int initial_view = 1;
  std::vector<SwitchEvent> events;

  friend bool operator==(const ViewTrace& a, const ViewTrace& b) {
    if (a.user_id != b.user_id || a.join_pts != b.join_pts || a.initial_view != b.initial_view ||
        a.events.size() != b.events.size())
      return false;
    for (std::size_t k = 0; k < a.events.size(); ++k)
      if (a.events[k].request_pts != b.events[k].request_pts || a.events[k].target_view != b.events[k].target_view)
        return false;
    return true;
  }
};

enum class Interactivity { Low, High, Mixed };

inline std::string to_string(Interactivity k) {
  switch (k) {
    case Interactivity::Low: return "low";
    case Interactivity::High: return "high";
    case Interactivity::Mixed: return "mixed";
  }
  return "?";
}

inline Interactivity parse_interactivity(const std::string& s) {
  if (s == "low") return Interactivity::Low;
  if (s == "high") return Interactivity::High;
  if (s == "mixed") return Interactivity::Mixed;
  fail(ErrorCode::Config, "unknown behavior model '" + s + "' (low, high, mixed)");
}

struct DwellProfile {
  double mean_dwell_chunks;
  int sweep_min, sweep_max;
};

inline constexpr DwellProfile kLowProfile{15.0, 1, 2};
inline constexpr DwellProfile kHighProfile{1.5, 2, 6};

/// Markov dwell/sweep user model. Each user dwells on a view for an
/// exponentially distributed time, then requests a new view.
///
/// Without a Zipf exponent the target is current +- L with L uniform in the
/// profile's sweep range. With zipf > 0 targets are drawn with weight
/// 1 / (1 + |v - hotspot|)^zipf, which concentrates viewing near the hotspot.
/// burst_period > 0 moves the hotspot every burst_period chunks and makes
/// most users react within the first few frames of the new period.
struct BehaviorModel {
  Interactivity kind = Interactivity::Low;
  DwellProfile low = kLowProfile;
  DwellProfile high = kHighProfile;
  double high_share = 0.5;  // fraction of high-interactivity users in Mixed
  double zipf = 0.0;
  int hotspot = 0;  // 0: centre view
  int burst_period = 0;
  double burst_follow = 0.8;
  std::uint64_t seed = 1;

  void validate() const {
    for (const auto* p : {&low, &high})
      require(p->mean_dwell_chunks > 0 && p->sweep_min >= 1 && p->sweep_max >= p->sweep_min, ErrorCode::Config,
              "dwell and sweep parameters must be positive");
    require(high_share >= 0 && high_share <= 1, ErrorCode::Config, "high_share must lie in [0, 1]");
    require(zipf >= 0, ErrorCode::Config, "zipf exponent must be >= 0");
    require(hotspot >= 0 && burst_period >= 0, ErrorCode::Config, "hotspot and burst_period must be >= 0");
    require(burst_follow >= 0 && burst_follow <= 1, ErrorCode::Config, "burst_follow must lie in [0, 1]");
  }
};

namespace trace_detail {

inline int draw_zipf(std::mt19937_64& rng, int n_views, int hotspot, double s, int exclude) {
  std::vector<double> w(static_cast<std::size_t>(n_views));
  for (int v = 1; v <= n_views; ++v)
    w[static_cast<std::size_t>(v - 1)] = v == exclude ? 0.0 : std::pow(1.0 + std::abs(v - hotspot), -s);
  std::discrete_distribution<int> pick(w.begin(), w.end());
  return pick(rng) + 1;
}

inline int sweep_target(std::mt19937_64& rng, int n_views, int current, const DwellProfile& prof) {
  std::uniform_int_distribution<int> len(prof.sweep_min, prof.sweep_max);
  std::bernoulli_distribution up(0.5);
  const int l = len(rng);
  int dir = up(rng) ? 1 : -1;
  if (current + dir < 1 || current + dir > n_views) dir = -dir;
  return std::clamp(current + dir * l, 1, n_views);
}

/// Hotspot during chunk j; moves to a fresh random view every burst period.
inline std::vector<int> hotspot_schedule(const BehaviorModel& m, int n_views, int chunks) {
  std::mt19937_64 rng(m.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> any(1, n_views);
  int h = m.hotspot > 0 ? std::min(m.hotspot, n_views) : (n_views + 1) / 2;
  std::vector<int> out(static_cast<std::size_t>(std::max(chunks, 1)));
  for (int j = 0; j < static_cast<int>(out.size()); ++j) {
    if (m.burst_period > 0 && j > 0 && j % m.burst_period == 0) {
      int next = any(rng);
      if (n_views > 1)
        while (next == h) next = any(rng);
      h = next;
    }
    out[static_cast<std::size_t>(j)] = h;
  }
  return out;
}

}  // namespace trace_detail

/// One trace per user over `duration_chunks` chunks of `frames_per_chunk`
/// frames. Users join during chunk 0. Deterministic per seed; each user has
/// its own random stream so adding users does not change existing traces.
inline std::vector<ViewTrace> gen_traces(const BehaviorModel& model, int n_users, int duration_chunks, int n_views,
                                         int frames_per_chunk = 25) {
  model.validate();
  require(n_users >= 1, ErrorCode::Config, "n_users must be >= 1");
  require(duration_chunks >= 0 && n_views >= 1 && frames_per_chunk >= 1, ErrorCode::Config,
          "invalid trace dimensions");
  const std::int64_t f = frames_per_chunk;
  const std::int64_t end = f * duration_chunks;
  const auto hot = trace_detail::hotspot_schedule(model, n_views, duration_chunks);
  auto hotspot_at = [&](std::int64_t pts) {
    const auto j = std::clamp<std::int64_t>(pts / f, 0, static_cast<std::int64_t>(hot.size()) - 1);
    return hot[static_cast<std::size_t>(j)];
  };

  std::vector<ViewTrace> traces;
  traces.reserve(static_cast<std::size_t>(n_users));
  for (int u = 0; u < n_users; ++u) {
    std::seed_seq seq{static_cast<std::uint64_t>(model.seed), static_cast<std::uint64_t>(u)};
    std::mt19937_64 rng(seq);
    bool high = model.kind == Interactivity::High;
    if (model.kind == Interactivity::Mixed) high = std::bernoulli_distribution(model.high_share)(rng);
    const DwellProfile& prof = high ? model.high : model.low;

    ViewTrace tr;
    tr.user_id = u + 1;
    tr.join_pts = std::uniform_int_distribution<std::int64_t>(0, f - 1)(rng);
    auto next_target = [&](int current, std::int64_t pts) {
      if (model.zipf > 0 && n_views > 1)
        return trace_detail::draw_zipf(rng, n_views, hotspot_at(pts), model.zipf, current);
      return trace_detail::sweep_target(rng, n_views, current, prof);
    };
    if (model.zipf > 0)
      tr.initial_view = trace_detail::draw_zipf(rng, n_views, hotspot_at(tr.join_pts), model.zipf, 0);
    else
      tr.initial_view = std::uniform_int_distribution<int>(1, n_views)(rng);

    std::exponential_distribution<double> dwell(1.0 / (prof.mean_dwell_chunks * static_cast<double>(f)));
    std::bernoulli_distribution follows(model.burst_follow);
    std::uniform_int_distribution<std::int64_t> react(0, std::max<std::int64_t>(f / 5, 1));
    int current = tr.initial_view;
    std::int64_t t = tr.join_pts;
    std::int64_t next_burst = model.burst_period > 0 ? f * model.burst_period : end;
    while (true) {
      std::int64_t when = t + std::max<std::int64_t>(1, std::llround(dwell(rng)));
      bool burst = false;
      if (when >= next_burst && next_burst < end) {
        // The hotspot moves: most users jump there shortly after the change.
        const std::int64_t at = next_burst;
        next_burst += f * model.burst_period;
        if (follows(rng)) {
          when = std::max(t + 1, at + react(rng));
          burst = true;
        }
      }
      if (when >= end) break;
      t = when;
      int target;
      if (burst)
        target = std::clamp(hotspot_at(t) + std::uniform_int_distribution<int>(-1, 1)(rng), 1, n_views);
      else
        target = next_target(current, t);
      if (target == current) continue;
      tr.events.push_back({tr.user_id, t, target});
      current = target;
    }
    traces.push_back(std::move(tr));
  }
  return traces;
}

/// Mean switch requests per user per chunk of presence.
inline double switch_rate(const std::vector<ViewTrace>& traces, int duration_chunks, int frames_per_chunk = 25) {
  double events = 0, chunks = 0;
  const double end = static_cast<double>(duration_chunks) * frames_per_chunk;
  for (const auto& t : traces) {
    events += static_cast<double>(t.events.size());
    chunks += std::max(0.0, (end - static_cast<double>(t.join_pts)) / frames_per_chunk);
  }
  return chunks > 0 ? events / chunks : 0.0;
}

/// Chunks needed to cover every join and switch request in `traces`.
inline int trace_extent_chunks(const std::vector<ViewTrace>& traces, int frames_per_chunk = 25) {
  std::int64_t last = -1;
  for (const auto& t : traces) {
    last = std::max(last, t.join_pts);
    if (!t.events.empty()) last = std::max(last, t.events.back().request_pts);
  }
  return static_cast<int>(last / frames_per_chunk + 1);
}

inline void validate_trace(const ViewTrace& t, std::optional<int> n_views = std::nullopt) {
  auto check_view = [&](int v) {
    require(v >= 1 && (!n_views || v <= *n_views), ErrorCode::Validation,
            "user " + std::to_string(t.user_id) + ": view " + std::to_string(v) + " out of range");
  };
  require(t.join_pts >= 0, ErrorCode::Validation, "user " + std::to_string(t.user_id) + ": negative join_pts");
  check_view(t.initial_view);
  std::int64_t last = t.join_pts;
  for (const auto& e : t.events) {
    check_view(e.target_view);
    require(e.request_pts > last, ErrorCode::Validation,
            "user " + std::to_string(t.user_id) + ": request_pts " + std::to_string(e.request_pts) +
                " not after " + std::to_string(last));
    last = e.request_pts;
  }
}

inline void save_traces(std::ostream& os, const std::vector<ViewTrace>& traces) {
  os << "user_id,join_pts,request_pts,target_view\n";
  for (const auto& t : traces) {
    os << t.user_id << ',' << t.join_pts << ",,\n";
    os << t.user_id << ',' << t.join_pts << ',' << t.join_pts << ',' << t.initial_view << '\n';
    for (const auto& e : t.events) os << t.user_id << ',' << t.join_pts << ',' << e.request_pts << ',' << e.target_view << '\n';
  }
}

inline void save_traces(const std::string& path, const std::vector<ViewTrace>& traces) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + path);
  save_traces(os, traces);
  require(static_cast<bool>(os), ErrorCode::Io, "write failed for " + path);
}

namespace trace_detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::int64_t parse_int(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::Parse, where + ": '" + s + "' is not an integer");
  }
  if (used != s.size()) fail(ErrorCode::Parse, where + ": '" + s + "' is not an integer");
  return v;
}

}  // namespace trace_detail

/// Parses the trace CSV. Users are returned in order of first appearance.
inline std::vector<ViewTrace> load_traces(std::istream& in, const std::string& name = "traces",
                                          std::optional<int> n_views = std::nullopt) {
  std::vector<ViewTrace> traces;
  std::map<int, std::size_t> index;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.rfind("user_id", 0) == 0) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto cells = trace_detail::split_csv(line);
    if (cells.size() != 4) fail(ErrorCode::Parse, where + ": expected 4 columns, got " + std::to_string(cells.size()));
    const int uid = static_cast<int>(trace_detail::parse_int(cells[0], where));
    const std::int64_t join = trace_detail::parse_int(cells[1], where);
    auto [it, fresh] = index.try_emplace(uid, traces.size());
    if (fresh) {
      traces.push_back(ViewTrace{uid, join, 1, {}});
    }
    ViewTrace& t = traces[it->second];
    require(t.join_pts == join, ErrorCode::Validation, where + ": join_pts differs from earlier rows of user " +
                                                           std::to_string(uid));
    if (cells[2].empty() && cells[3].empty()) continue;
    if (cells[2].empty() || cells[3].empty()) fail(ErrorCode::Parse, where + ": request_pts and target_view go together");
    const std::int64_t pts = trace_detail::parse_int(cells[2], where);
    const int view = static_cast<int>(trace_detail::parse_int(cells[3], where));
    require(view >= 1 && (!n_views || view <= *n_views), ErrorCode::Validation,
            where + ": view " + std::to_string(view) + " out of range");
    if (pts == join && t.events.empty()) {
      t.initial_view = view;
      continue;
    }
    const std::int64_t last = t.events.empty() ? join : t.events.back().request_pts;
    require(pts > last, ErrorCode::Validation,
            where + ": request_pts " + std::to_string(pts) + " not after " + std::to_string(last));
    t.events.push_back({uid, pts, view});
  }
  return traces;
}

inline std::vector<ViewTrace> load_traces(const std::string& path, std::optional<int> n_views = std::nullopt) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open trace file " + path);
  return load_traces(in, path, n_views);
}

}  // namespace varfvv
