#pragma once

// Per-user frame reassembly at the edge. A session never encodes anything:
// each output frame is an already-encoded frame picked from the shared
// SyncBuffer, chosen so the output stays decodable.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "varfvv/error.hpp"
#include "varfvv/stream_model.hpp"
#include "varfvv/sync_buffer.hpp"

namespace varfvv {

struct SwitchEvent {
  int user_id = 0;
  std::int64_t request_pts = 0;
  int target_view = 1;
};

namespace mode {
/// Waiting for the first random-access point after joining.
struct Joining {
  int view;
};
struct Constant {
  int view;
};
/// Walking one view per frame along the staggered S I-frames. `current` is
/// the view of the last emitted frame; `started` is false while the session
/// still emits from the pre-switch source waiting for the first I.
struct Sweeping {
  int current;
  int target;
  int direction;
  bool started;
};
/// On S_view after a sweep (or join) until the next chunk boundary.
struct ResyncS {
  int view;
};
}  // namespace mode

using SessionMode = std::variant<mode::Joining, mode::Constant, mode::Sweeping, mode::ResyncS>;

class EdgeSession {
 public:
  EdgeSession(const StreamConfig& cfg, int user_id, std::int64_t join_pts, int initial_view)
      : n_views_(cfg.n_views),
        frames_per_chunk_(cfg.frames_per_chunk()),
        user_id_(user_id),
        join_pts_(join_pts),
        next_output_pts_(join_pts),
        mode_(mode::Joining{initial_view}) {
    check_view(initial_view);
  }

  int user_id() const noexcept { return user_id_; }
  std::int64_t join_pts() const noexcept { return join_pts_; }
  std::int64_t next_output_pts() const noexcept { return next_output_pts_; }
  const SessionMode& mode() const noexcept { return mode_; }
  const std::vector<Frame>& emitted() const noexcept { return emitted_; }

  /// Frames copied from the buffer into the output stream.
  std::uint64_t frames_reassembled() const noexcept { return emitted_.size(); }
  /// Always zero: reassembly never re-encodes.
  std::uint64_t frames_reencoded() const noexcept { return 0; }

  /// The view the user is currently watching (last emitted, or the join view).
  int current_view() const {
    return std::visit(
        [](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, mode::Sweeping>)
            return m.current;
          else
            return m.view;
        },
        mode_);
  }

  void handle_event(const SwitchEvent& event) {
    check_view(event.target_view);
    const int target = event.target_view;
    std::visit(
        [&](auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, mode::Joining>) {
            m.view = target;
          } else if constexpr (std::is_same_v<M, mode::Constant> || std::is_same_v<M, mode::ResyncS>) {
            if (target == m.view) return;
            const bool from_s = std::is_same_v<M, mode::ResyncS>;
            mode_ = mode::Sweeping{m.view, target, target > m.view ? 1 : -1, from_s};
          } else {
            // Retarget from the current sweep position.
            if (target == m.current) {
              mode_ = m.started ? SessionMode{mode::ResyncS{m.current}} : SessionMode{mode::Constant{m.current}};
              return;
            }
            m.target = target;
            m.direction = target > m.current ? 1 : -1;
          }
        },
        mode_);
  }

  /// Emits the frame at next_output_pts (or, while joining, at the first
  /// random-access point at or after it). Throws StarvedBuffer if the buffer
  /// watermark has not reached the required PTS; nothing is skipped.
  Frame next_output_frame(const SyncBuffer& buffer) {
    const std::int64_t t = next_output_pts_;
    require_ready(buffer, t);
    const int chunk_pos = static_cast<int>(t % frames_per_chunk_);

    Frame out;
    if (auto* j = std::get_if<mode::Joining>(&mode_)) {
      const int v = j->view;
      std::int64_t at = t;
      while (true) {
        require_ready(buffer, at);
        if (at % frames_per_chunk_ == 0) {
          out = fetch(buffer, v, Representation::Constant, at);
          mode_ = mode::Constant{v};
          break;
        }
        if (auto s = fetch(buffer, v, Representation::Switching, at); s.kind == FrameKind::I) {
          out = s;
          mode_ = mode::ResyncS{v};
          break;
        }
        ++at;
      }
    } else if (auto* c = std::get_if<mode::Constant>(&mode_)) {
      out = fetch(buffer, c->view, Representation::Constant, t);
    } else if (auto* s = std::get_if<mode::Sweeping>(&mode_)) {
      const int next = s->current + s->direction;
      Frame candidate = fetch(buffer, next, Representation::Switching, t);
      if (candidate.kind == FrameKind::I) {
        out = candidate;
        const int target = s->target;
        s->current = next;
        s->started = true;
        if (next == target) mode_ = mode::ResyncS{target};
      } else {
        // Hold on the current source; after the sweep has started this is an
        // S I-frame by the staggering of adjacent views.
        out = fetch(buffer, s->current, s->started ? Representation::Switching : Representation::Constant, t);
      }
    } else {
      auto& r = std::get<mode::ResyncS>(mode_);
      if (chunk_pos == 0) {
        out = fetch(buffer, r.view, Representation::Constant, t);
        mode_ = mode::Constant{r.view};
      } else {
        out = fetch(buffer, r.view, Representation::Switching, t);
      }
    }
    next_output_pts_ = out.pts + 1;
    emitted_.push_back(out);
    return out;
  }

 private:
  void check_view(int view) const {
    require(view >= 1 && view <= n_views_, ErrorCode::InvalidView,
            "view " + std::to_string(view) + " outside 1.." + std::to_string(n_views_));
  }

  static void require_ready(const SyncBuffer& buffer, std::int64_t pts) {
    if (buffer.watermark() < pts)
      fail(ErrorCode::StarvedBuffer,
           "pts " + std::to_string(pts) + " above watermark " + std::to_string(buffer.watermark()));
  }

  static Frame fetch(const SyncBuffer& buffer, int view, Representation rep, std::int64_t pts) {
    auto f = buffer.find(view, rep, pts);
    if (!f)
      fail(ErrorCode::StarvedBuffer, "frame " + std::to_string(view) + to_char(rep) + "@" + std::to_string(pts) +
                                         " not available");
    return *f;
  }

  int n_views_;
  int frames_per_chunk_;
  int user_id_;
  std::int64_t join_pts_;
  std::int64_t next_output_pts_;
  SessionMode mode_;
  std::vector<Frame> emitted_;
};

struct StreamViolation {
  std::size_t index = 0;
  std::string reason;
};

/// Decodability oracle: PTS advances by exactly one, and every P-frame
/// directly follows a frame of the same (view, representation) at pts - 1.
inline std::optional<StreamViolation> validate_stream(std::span<const Frame> emitted) {
  for (std::size_t k = 0; k < emitted.size(); ++k) {
    const Frame& f = emitted[k];
    if (k > 0 && f.pts != emitted[k - 1].pts + 1)
      return StreamViolation{k, "pts " + std::to_string(f.pts) + " does not follow " +
                                    std::to_string(emitted[k - 1].pts)};
    if (f.kind == FrameKind::P) {
      if (k == 0) return StreamViolation{k, "stream starts with a P-frame"};
      const Frame& prev = emitted[k - 1];
      if (prev.view != f.view || prev.rep != f.rep || prev.pts != f.pts - 1)
        return StreamViolation{k, std::string("P-frame of ") + std::to_string(f.view) + to_char(f.rep) +
                                      " lacks its reference"};
    }
  }
  return std::nullopt;
}

struct SwitchDelay {
  int user_id = 0;
  std::int64_t request_pts = 0;
  std::int64_t frames = 0;
  double ms = 0;
};

struct DelayReport {
  std::vector<SwitchDelay> switches;
  std::int64_t startup_frames = 0;
  double startup_ms = 0;
};

/// Switch delay: PTS of the first frame after the request whose view differs
/// from the view shown at the request, minus the request PTS. Events whose
/// target equals the view on screen do not change anything and are skipped,
/// as are requests overridden by a later request before the view changed and
/// requests the log ends too early to show (within `settle_frames` of its
/// last frame). `events` must be ordered by request_pts.
inline DelayReport measure_delays(std::span<const Frame> log, std::span<const SwitchEvent> events,
                                  std::int64_t join_pts, double fps, std::int64_t settle_frames = 2) {
  require(!log.empty(), ErrorCode::IncompleteLog, "empty session log");
  const double ms_per_frame = 1000.0 / fps;
  DelayReport report;
  report.startup_frames = log.front().pts - join_pts;
  report.startup_ms = static_cast<double>(report.startup_frames) * ms_per_frame;

  for (std::size_t k = 0; k < events.size(); ++k) {
    const SwitchEvent& e = events[k];
    auto after = std::upper_bound(log.begin(), log.end(), e.request_pts,
                                  [](std::int64_t pts, const Frame& f) { return pts < f.pts; });
    if (after == log.begin()) continue;  // request before the first frame: part of startup
    const int shown = std::prev(after)->view;
    if (shown == e.target_view) continue;
    auto moved = std::find_if(after, log.end(), [&](const Frame& f) { return f.view != shown; });
    const bool overridden =
        k + 1 < events.size() && (moved == log.end() || moved->pts > events[k + 1].request_pts);
    if (overridden) continue;
    if (moved == log.end() && e.request_pts + settle_frames >= log.back().pts) continue;
    if (moved == log.end())
      fail(ErrorCode::IncompleteLog, "no emission after switch request at pts " + std::to_string(e.request_pts));
    const std::int64_t frames = moved->pts - e.request_pts;
    report.switches.push_back({e.user_id, e.request_pts, frames, static_cast<double>(frames) * ms_per_frame});
  }
  return report;
}

/// Bits sent to one user, grouped by chunk index (ascending).
inline std::map<std::int64_t, std::int64_t> per_user_bits(std::span<const Frame> emitted) {
  std::map<std::int64_t, std::int64_t> out;
  for (const auto& f : emitted) out[f.chunk] += f.size_bits;
  return out;
}

inline void write_emitted_log(std::ostream& os, int user_id, std::span<const Frame> emitted, bool header = true) {
  if (header) os << "user_id,pts,view,rep,kind,size_bits\n";
  for (const auto& f : emitted)
    os << user_id << ',' << f.pts << ',' << f.view << ',' << to_char(f.rep) << ',' << to_char(f.kind) << ','
       << f.size_bits << '\n';
}

}  // namespace varfvv
