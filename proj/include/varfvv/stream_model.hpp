#pragma once

// Synthetic multiview source: GoP layouts for the view-switching (S) and
// view-constant (C) representations, PTS assignment and the mapping from a
// chunk bit budget to per-frame sizes.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "varfvv/error.hpp"

namespace varfvv {

enum class Representation : std::uint8_t { Switching, Constant };
enum class FrameKind : std::uint8_t { I, P };

constexpr char to_char(Representation rep) noexcept { return rep == Representation::Switching ? 'S' : 'C'; }
constexpr char to_char(FrameKind kind) noexcept { return kind == FrameKind::I ? 'I' : 'P'; }

struct StreamConfig {
  int n_views = 1;
  int fps = 25;
  double chunk_seconds = 1.0;
  int gop_constant = 25;
  int gop_switching = 2;
  int i_to_p_ratio = 4;

  /// Frames per chunk, F = fps * chunk_seconds. Throws if not a positive integer.
  int frames_per_chunk() const {
    const double f = fps * chunk_seconds;
    const double rounded = std::round(f);
    require(fps > 0 && chunk_seconds > 0 && rounded >= 1 && std::abs(f - rounded) < 1e-9, ErrorCode::Config,
            "fps * chunk_seconds must be a positive integer");
    return static_cast<int>(rounded);
  }

  double frame_interval_ms() const { return 1000.0 / fps; }

  void validate() const {
    require(n_views >= 1, ErrorCode::Config, "n_views must be >= 1");
    (void)frames_per_chunk();
    require(gop_constant >= 1, ErrorCode::Config, "gop_constant must be >= 1");
    require(gop_switching >= 2, ErrorCode::Config, "gop_switching must be >= 2");
    require(i_to_p_ratio > 1, ErrorCode::Config, "i_to_p_ratio must be > 1");
  }
};

struct Frame {
  int view = 1;  // 1-based
  Representation rep = Representation::Constant;
  std::int64_t chunk = 0;
  std::int64_t pts = 0;  // global frame counter, units of 1/fps s
  FrameKind kind = FrameKind::P;
  std::int64_t size_bits = 0;

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct RepresentationChunk {
  int view = 1;
  Representation rep = Representation::Constant;
  std::int64_t chunk = 0;
  std::vector<Frame> frames;
  std::int64_t budget_bits = 0;
};

/// Kind of the frame at intra-chunk position `t`.
///
/// C: an I every gop_constant frames starting at t = 0.
/// S, odd view: I at t = 0 (mod gop_switching).
/// S, even view: I at t = 1 (mod gop_switching), plus an inserted I at t = 0.
/// With gop_switching = 2 adjacent S representations are staggered so that at
/// every instant at least one of the two carries an I-frame.
inline FrameKind frame_kind(const StreamConfig& cfg, int view, Representation rep, int t) {
  if (rep == Representation::Constant) return t % cfg.gop_constant == 0 ? FrameKind::I : FrameKind::P;
  if (t == 0) return FrameKind::I;
  const int phase = (view % 2 == 1) ? 0 : 1;
  return t % cfg.gop_switching == phase ? FrameKind::I : FrameKind::P;
}

inline std::vector<FrameKind> build_gop_layout(const StreamConfig& cfg, int view, Representation rep,
                                               std::int64_t chunk_index = 0) {
  require(view >= 1 && view <= cfg.n_views, ErrorCode::Config,
          "view index " + std::to_string(view) + " outside 1.." + std::to_string(cfg.n_views));
  require(rep == Representation::Constant || rep == Representation::Switching, ErrorCode::Config,
          "unknown representation");
  require(chunk_index >= 0, ErrorCode::Config, "negative chunk index");
  const int frames = cfg.frames_per_chunk();
  std::vector<FrameKind> layout(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) layout[static_cast<std::size_t>(t)] = frame_kind(cfg, view, rep, t);
  return layout;
}

/// Splits a chunk budget over its frames: P = floor(B / (k*nI + nP)), I = k*P,
/// and the rounding remainder goes to the first I-frame (or the first frame if
/// the layout has no I). The sizes always sum to `budget_bits`.
inline std::vector<std::int64_t> split_frame_sizes(std::span<const FrameKind> layout, std::int64_t budget_bits,
                                                   int i_to_p_ratio) {
  require(i_to_p_ratio > 1, ErrorCode::Config, "i_to_p_ratio must be > 1");
  require(!layout.empty(), ErrorCode::Config, "empty layout");
  require(budget_bits >= static_cast<std::int64_t>(layout.size()), ErrorCode::BudgetTooSmall,
          "budget " + std::to_string(budget_bits) + " below frame count " + std::to_string(layout.size()));
  std::int64_t n_i = 0;
  for (auto k : layout) n_i += (k == FrameKind::I);
  const std::int64_t n_p = static_cast<std::int64_t>(layout.size()) - n_i;
  const std::int64_t p_size = budget_bits / (i_to_p_ratio * n_i + n_p);
  const std::int64_t i_size = i_to_p_ratio * p_size;

  std::vector<std::int64_t> sizes(layout.size());
  std::int64_t total = 0;
  std::size_t first_i = layout.size();
  for (std::size_t t = 0; t < layout.size(); ++t) {
    sizes[t] = layout[t] == FrameKind::I ? i_size : p_size;
    total += sizes[t];
    if (layout[t] == FrameKind::I && first_i == layout.size()) first_i = t;
  }
  sizes[first_i == layout.size() ? 0 : first_i] += budget_bits - total;
  return sizes;
}

inline RepresentationChunk encode_chunk(const StreamConfig& cfg, int view, Representation rep, std::int64_t chunk,
                                        std::int64_t budget_bits) {
  const auto layout = build_gop_layout(cfg, view, rep, chunk);
  const auto sizes = split_frame_sizes(layout, budget_bits, cfg.i_to_p_ratio);
  const std::int64_t frames = static_cast<std::int64_t>(layout.size());

  RepresentationChunk out{view, rep, chunk, {}, budget_bits};
  out.frames.reserve(layout.size());
  for (std::int64_t t = 0; t < frames; ++t) {
    const auto idx = static_cast<std::size_t>(t);
    out.frames.push_back(Frame{view, rep, chunk, chunk * frames + t, layout[idx], sizes[idx]});
  }
  return out;
}

/// Per-chunk integer budgets for every view in both representations.
struct ChunkBudget {
  std::int64_t chunk = 0;
  std::vector<std::int64_t> constant_bits;   // R_{i,j}, index i-1
  std::vector<std::int64_t> switching_bits;  // R^_{i,j}, index i-1
};

/// Encodes 2N representation chunks per chunk index, ordered by
/// (chunk, view, representation S then C).
inline std::vector<RepresentationChunk> generate_multiview_streams(const StreamConfig& cfg,
                                                                   std::span<const ChunkBudget> allocations) {
  cfg.validate();
  std::vector<RepresentationChunk> out;
  out.reserve(allocations.size() * static_cast<std::size_t>(2 * cfg.n_views));
  for (const auto& a : allocations) {
    require(a.constant_bits.size() == static_cast<std::size_t>(cfg.n_views) &&
                a.switching_bits.size() == static_cast<std::size_t>(cfg.n_views),
            ErrorCode::IncompleteAllocation, "chunk " + std::to_string(a.chunk) + " lacks budgets for all views");
    for (int v = 1; v <= cfg.n_views; ++v) {
      const auto i = static_cast<std::size_t>(v - 1);
      out.push_back(encode_chunk(cfg, v, Representation::Switching, a.chunk, a.switching_bits[i]));
      out.push_back(encode_chunk(cfg, v, Representation::Constant, a.chunk, a.constant_bits[i]));
    }
  }
  return out;
}

inline void write_stream_dump(std::ostream& os, std::span<const RepresentationChunk> chunks) {
  os << "view,rep,chunk,pts,kind,size_bits\n";
  for (const auto& c : chunks)
    for (const auto& f : c.frames)
      os << f.view << ',' << to_char(f.rep) << ',' << f.chunk << ',' << f.pts << ',' << to_char(f.kind) << ','
         << f.size_bits << '\n';
}

}  // namespace varfvv
