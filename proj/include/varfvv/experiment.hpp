#pragma once

// Closed-loop simulation: traces -> popularity -> allocation -> streams ->
// edge sessions -> metrics, one chunk at a time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "varfvv/bit_allocator.hpp"
#include "varfvv/edge_session.hpp"
#include "varfvv/error.hpp"
#include "varfvv/popularity.hpp"
#include "varfvv/stgnn.hpp"
#include "varfvv/stream_model.hpp"
#include "varfvv/sync_buffer.hpp"
#include "varfvv/traces.hpp"
#include "varfvv/view_graph.hpp"

namespace varfvv {

enum class Scheme { Adaptive, PpcOnly, GnnOnly, Uniform };

inline constexpr Scheme kAllSchemes[] = {Scheme::Adaptive, Scheme::GnnOnly, Scheme::PpcOnly, Scheme::Uniform};

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Adaptive: return "adaptive";
    case Scheme::PpcOnly: return "ppc-only";
    case Scheme::GnnOnly: return "gnn-only";
    case Scheme::Uniform: return "uniform";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "adaptive" || s == "popularity-adaptive") return Scheme::Adaptive;
  if (s == "ppc-only" || s == "ppc") return Scheme::PpcOnly;
  if (s == "gnn-only" || s == "gnn") return Scheme::GnnOnly;
  if (s == "uniform") return Scheme::Uniform;
  fail(ErrorCode::Config, "unknown scheme '" + s + "' (adaptive, ppc-only, gnn-only, uniform)");
}

inline PredictorKind predictor_of(Scheme s) {
  switch (s) {
    case Scheme::PpcOnly: return PredictorKind::Ppc;
    case Scheme::GnnOnly: return PredictorKind::Gnn;
    default: return PredictorKind::Combined;
  }
}

/// Megabits per chunk to integer bits.
inline std::int64_t to_bits(double megabits) { return std::llround(megabits * 1e6); }

inline ChunkBudget to_chunk_budget(const Allocation& a) {
  ChunkBudget b{a.chunk, {}, {}};
  for (double r : a.constant) b.constant_bits.push_back(to_bits(r));
  for (double r : a.switching) b.switching_bits.push_back(to_bits(r));
  return b;
}

struct ExperimentConfig {
  StreamConfig stream{.n_views = 4};
  QoeParams qoe;
  int sw = 4;
  double r_tar = 0;  // Mbit/s over all representations; 0 means 10 * N
  double bound_lo = 0.1, bound_hi = 4.0;  // rate box as multiples of the fair share
  TrainConfig train;
  int warmup_chunks = 10;  // initial GNN training once this many chunks are observed
  std::string adjacency;   // edge-list file; empty means a linear rig
  BehaviorModel model;
  int n_users = 50;
  int chunks = 60;
  std::string traces;  // trace file; empty means generate from `model`
  Scheme scheme = Scheme::Adaptive;  // allocation actually streamed to users
  bool compare_schemes = true;       // also allocate with every other scheme
  std::uint64_t seed = 1;
  std::string dump_dir;  // where a decodability violation is dumped

  double target_rate() const { return r_tar > 0 ? r_tar : 10.0 * stream.n_views; }

  void validate() const {
    stream.validate();
    qoe.validate();
    train.validate();
    model.validate();
    require(sw >= 1, ErrorCode::Config, "sw must be >= 1");
    require(r_tar >= 0, ErrorCode::Config, "r_tar must be >= 0");
    require(bound_lo >= 0 && bound_hi >= bound_lo, ErrorCode::Config, "bounds must satisfy 0 <= lo <= hi");
    require(warmup_chunks >= train.horizon + 1, ErrorCode::Config,
            "warmup_chunks must exceed the prediction horizon");
    require(n_users >= 1 && chunks >= 0, ErrorCode::Config, "need users >= 1 and chunks >= 0");
  }
};

struct BandwidthRow {
  int user_id = 0;
  std::int64_t chunk = 0;
  std::int64_t varfvv = 0, has10 = 0, conventional = 0;  // bits
};

struct ExperimentReport {
  ExperimentConfig config;
  std::int64_t chunks = 0;
  std::vector<std::string> schemes;                         // evaluated, primary first
  std::map<std::string, std::vector<double>> qoe;           // per scheme, per chunk
  std::map<std::string, std::vector<double>> precision;     // per predictor, per chunk
  std::vector<ChunkPopularity> actual;
  std::string predictor;                        // primary scheme's predictor
  std::vector<PopularityPrediction> predicted;
  std::vector<Allocation> allocations;          // primary scheme
  std::vector<SwitchDelay> delays;
  std::vector<double> startup_ms;
  std::vector<BandwidthRow> bandwidth;
  std::int64_t sessions = 0, decodable_sessions = 0;
  std::uint64_t frames_reassembled = 0, frames_reencoded = 0;
  std::vector<double> gnn_initial_mae;  // per epoch of the initial switching-model fit
};

enum class BandwidthScheme { Conventional, Has10, Varfvv };

/// Bits delivered to one user in one chunk. Conventional ships every constant
/// view; HAS10 ships the 10 constant views around the user's view; VARFVV
/// ships what the edge session emitted.
inline std::int64_t baseline_bandwidth(BandwidthScheme scheme, const ChunkBudget& budget, int current_view,
                                       std::span<const Frame> emitted_in_chunk) {
  const int n = static_cast<int>(budget.constant_bits.size());
  switch (scheme) {
    case BandwidthScheme::Conventional: {
      std::int64_t s = 0;
      for (auto b : budget.constant_bits) s += b;
      return s;
    }
    case BandwidthScheme::Has10: {
      require(current_view >= 1 && current_view <= n, ErrorCode::InvalidView, "current view out of range");
      const int width = std::min(10, n);
      const int lo = std::clamp(current_view - (width - 1) / 2, 1, n - width + 1);
      std::int64_t s = 0;
      for (int v = lo; v < lo + width; ++v) s += budget.constant_bits[static_cast<std::size_t>(v - 1)];
      return s;
    }
    case BandwidthScheme::Varfvv: {
      std::int64_t s = 0;
      for (const auto& f : emitted_in_chunk) s += f.size_bits;
      return s;
    }
  }
  return 0;
}

namespace experiment_detail {

struct SchemeState {
  Scheme scheme;
  Allocation previous;  // chunk j - 1 (uniform prior before chunk 0)
  Allocation current;
  std::int64_t n_coded = 0;
  double r_coded = 0;
};

struct UserState {
  const ViewTrace* trace = nullptr;
  std::optional<EdgeSession> session;
  std::size_t next_event = 0;
};

inline bool needs_gnn(const ExperimentConfig& cfg) {
  return cfg.compare_schemes || cfg.scheme == Scheme::Adaptive || cfg.scheme == Scheme::GnnOnly;
}

inline void dump_violation(const ExperimentConfig& cfg, const EdgeSession& s, const StreamViolation& v) {
  std::string where = "user " + std::to_string(s.user_id()) + " frame " + std::to_string(v.index) + ": " + v.reason;
  if (!cfg.dump_dir.empty()) {
    const std::string path = cfg.dump_dir + "/violation_user" + std::to_string(s.user_id()) + ".csv";
    std::ofstream os(path);
    if (os) {
      write_emitted_log(os, s.user_id(), s.emitted());
      where += " (log dumped to " + path + ")";
    }
  }
  fail(ErrorCode::DecodabilityViolation, where);
}

}  // namespace experiment_detail

inline ViewGraph experiment_graph(const ExperimentConfig& cfg) {
  return cfg.adjacency.empty() ? ViewGraph::path(cfg.stream.n_views)
                               : ViewGraph::load_edges(cfg.adjacency, cfg.stream.n_views);
}

inline std::vector<ViewTrace> experiment_traces(const ExperimentConfig& cfg) {
  if (!cfg.traces.empty()) return load_traces(cfg.traces, cfg.stream.n_views);
  BehaviorModel m = cfg.model;
  m.seed = cfg.seed;
  return gen_traces(m, cfg.n_users, cfg.chunks, cfg.stream.n_views, cfg.stream.frames_per_chunk());
}

/// Runs the closed loop over `traces`. Allocation for chunk j only sees the
/// popularity measured up to chunk j - 1.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::vector<ViewTrace>& traces) {
  using namespace experiment_detail;
  cfg.validate();
  const int n = cfg.stream.n_views;
  const int f = cfg.stream.frames_per_chunk();
  for (const auto& t : traces) validate_trace(t, n);

  ExperimentReport rep;
  rep.config = cfg;
  rep.chunks = cfg.chunks;

  const double r_avg = cfg.target_rate() * cfg.stream.chunk_seconds;
  const double fair = r_avg / (2.0 * n);
  const RateBounds bounds{cfg.bound_lo * fair, cfg.bound_hi * fair, cfg.bound_lo * fair, cfg.bound_hi * fair};
  bounds.validate();

  std::vector<SchemeState> schemes;
  schemes.push_back({cfg.scheme, uniform_allocate(r_avg, n, bounds, -1), {}, 0, 0});
  if (cfg.compare_schemes)
    for (Scheme s : kAllSchemes)
      if (s != cfg.scheme) schemes.push_back({s, uniform_allocate(r_avg, n, bounds, -1), {}, 0, 0});
  for (const auto& s : schemes) {
    rep.schemes.push_back(to_string(s.scheme));
    rep.qoe[to_string(s.scheme)];
  }

  std::unique_ptr<StgnnTrainer> gnn_s, gnn_c;
  if (needs_gnn(cfg)) {
    const ViewGraph graph = experiment_graph(cfg);
    gnn_s = std::make_unique<StgnnTrainer>(graph, cfg.train, cfg.seed);
    if (cfg.compare_schemes || cfg.scheme == Scheme::GnnOnly)
      gnn_c = std::make_unique<StgnnTrainer>(graph, cfg.train, cfg.seed + 0x51);
  }
  std::vector<PredictorKind> predictors{PredictorKind::Ppc};
  if (gnn_s) predictors.push_back(PredictorKind::Combined);
  if (gnn_c) predictors.push_back(PredictorKind::Gnn);
  for (auto k : predictors) rep.precision[to_string(k)];
  const PredictorKind primary_predictor =
      cfg.scheme == Scheme::Uniform ? PredictorKind::Ppc : predictor_of(cfg.scheme);
  rep.predictor = to_string(primary_predictor);

  std::vector<UserState> users;
  users.reserve(traces.size());
  for (const auto& t : traces) users.push_back({&t, std::nullopt, 0});

  SyncBuffer buffer(n, 0);
  PopularityHistory history;

  for (int j = 0; j < cfg.chunks; ++j) {
    const std::int64_t chunk_start = static_cast<std::int64_t>(j) * f;
    const std::int64_t chunk_end = chunk_start + f;

    // Predict and allocate from chunks 0 .. j-1 only.
    std::map<PredictorKind, PopularityPrediction> pred;
    for (auto k : predictors) pred[k] = predict_popularity(history, n, k, gnn_s.get(), gnn_c.get());

    for (auto& s : schemes) {
      const BudgetSchedule sched{cfg.target_rate(), cfg.stream.chunk_seconds, cfg.sw, s.n_coded, s.r_coded, n,
                                 bounds};
      const TargetBits target = target_bits(sched);
      // Nothing observed yet: every scheme starts from the equal split.
      if (s.scheme == Scheme::Uniform || pred.at(PredictorKind::Ppc).cold_start) {
        s.current = uniform_allocate(target.bits, n, bounds, j);
      } else {
        const auto& p = pred.at(predictor_of(s.scheme));
        s.current = allocate(as_span(p.p), as_span(p.p_hat), s.previous.constant, target.bits, cfg.qoe, bounds, j);
      }
      if (target.floored) s.current.flags |= kBudgetFloored;
      s.n_coded += 1;
      s.r_coded += s.current.total();
    }
    const SchemeState& primary = schemes.front();
    rep.allocations.push_back(primary.current);
    rep.predicted.push_back(pred.at(primary_predictor));

    const ChunkBudget budget = to_chunk_budget(primary.current);
    for (const auto& rc : generate_multiview_streams(cfg.stream, std::span<const ChunkBudget>(&budget, 1)))
      for (const auto& fr : rc.frames) buffer.push(fr);

    // Advance every session through the chunk.
    PopularityCounter counter(n, j);
    for (auto& u : users) {
      const ViewTrace& tr = *u.trace;
      if (!u.session) {
        if (tr.join_pts >= chunk_end) continue;
        u.session.emplace(cfg.stream, tr.user_id, tr.join_pts, tr.initial_view);
      }
      EdgeSession& sess = *u.session;
      const std::size_t first_new = sess.emitted().size();
      while (sess.next_output_pts() < chunk_end) {
        const std::int64_t t = sess.next_output_pts();
        while (u.next_event < tr.events.size() && tr.events[u.next_event].request_pts < t)
          sess.handle_event(tr.events[u.next_event++]);
        try {
          sess.next_output_frame(buffer);
        } catch (const Error& e) {
          // A late joiner waiting for a random-access point in the next chunk.
          if (e.code() != ErrorCode::StarvedBuffer || !std::holds_alternative<mode::Joining>(sess.mode())) throw;
          break;
        }
      }
      const auto& log = sess.emitted();
      for (std::size_t k = first_new; k < log.size(); ++k) counter.add(log[k]);
      if (first_new < log.size()) {
        const std::span<const Frame> fresh(log.data() + first_new, log.size() - first_new);
        BandwidthRow row{tr.user_id, j, 0, 0, 0};
        row.varfvv = baseline_bandwidth(BandwidthScheme::Varfvv, budget, fresh.front().view, fresh);
        row.has10 = baseline_bandwidth(BandwidthScheme::Has10, budget, fresh.front().view, fresh);
        row.conventional = baseline_bandwidth(BandwidthScheme::Conventional, budget, fresh.front().view, fresh);
        rep.bandwidth.push_back(row);
      }
    }
    buffer.evict_before(chunk_end);

    // Score the chunk against what users actually watched.
    const ChunkPopularity actual = counter.result();
    for (auto k : predictors) rep.precision[to_string(k)].push_back(precision(pred.at(k), actual));
    for (auto& s : schemes) {
      rep.qoe[to_string(s.scheme)].push_back(
          qoe_total(s.current.constant, s.current.switching, std::span<const double>(s.previous.constant),
                    as_span(actual.x), as_span(actual.x_hat), cfg.qoe)
              .total);
      s.previous = std::move(s.current);
    }
    rep.actual.push_back(actual);
    history.x.push_back(actual.x);
    history.x_hat.push_back(actual.x_hat);

    const int observed = j + 1;
    for (auto* m : {gnn_s.get(), gnn_c.get()}) {
      if (m == nullptr || observed < cfg.warmup_chunks) continue;
      const auto& series = m == gnn_s.get() ? history.x_hat : history.x;
      if (observed == cfg.warmup_chunks) {
        auto r = m->initial_fit(series);
        if (m == gnn_s.get()) rep.gnn_initial_mae = r.epoch_mae;
      } else {
        m->online_update(series);
      }
    }
  }

  // Per-session checks and delay accounting.
  const double fps = cfg.stream.fps;
  for (const auto& u : users) {
    if (!u.session) continue;
    const EdgeSession& sess = *u.session;
    ++rep.sessions;
    rep.frames_reassembled += sess.frames_reassembled();
    rep.frames_reencoded += sess.frames_reencoded();
    if (auto v = validate_stream(sess.emitted())) experiment_detail::dump_violation(cfg, sess, *v);
    ++rep.decodable_sessions;
    if (sess.emitted().empty()) continue;
    const std::int64_t last = sess.emitted().back().pts;
    std::vector<SwitchEvent> seen;
    for (const auto& e : u.trace->events)
      if (e.request_pts < last) seen.push_back(e);
    const DelayReport d = measure_delays(sess.emitted(), seen, u.trace->join_pts, fps);
    rep.startup_ms.push_back(d.startup_ms);
    rep.delays.insert(rep.delays.end(), d.switches.begin(), d.switches.end());
  }
  return rep;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, experiment_traces(cfg));
}

}  // namespace varfvv
