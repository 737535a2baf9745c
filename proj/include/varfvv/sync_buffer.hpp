#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <deque>
#include <limits>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "varfvv/error.hpp"
#include "varfvv/stream_model.hpp"

namespace varfvv {

/// PTS-synchronized frame store shared by every session on an edge node.
///
/// One queue per (view, representation). Frames may arrive in any order
/// across and within queues; a frame becomes readable once every queue holds
/// a gap-free run up to its PTS (the watermark). Pushes below a queue's
/// eviction floor are rejected as out of order.
///
/// Thread safety: concurrent `push` calls and concurrent readers are allowed.
/// Watermark updates happen under the writer lock, so readers never observe a
/// watermark ahead of the data.
class SyncBuffer {
 public:
  explicit SyncBuffer(int n_views, std::int64_t start_pts = 0)
      : n_views_(n_views), queues_(static_cast<std::size_t>(2 * n_views)), watermark_(start_pts - 1) {
    require(n_views >= 1, ErrorCode::Config, "SyncBuffer needs at least one view");
    for (auto& q : queues_) {
      q.base = start_pts;
      q.contiguous_end = start_pts - 1;
    }
  }

  int n_views() const noexcept { return n_views_; }

  void push(const Frame& frame) {
    require(frame.view >= 1 && frame.view <= n_views_, ErrorCode::InvalidView,
            "frame view " + std::to_string(frame.view));
    std::unique_lock lock(mutex_);
    Queue& q = queue(frame.view, frame.rep);
    if (frame.pts < q.base)
      fail(ErrorCode::OutOfOrderFrame, "pts " + std::to_string(frame.pts) + " below queue floor " +
                                           std::to_string(q.base) + " for view " + std::to_string(frame.view));
    const auto offset = static_cast<std::size_t>(frame.pts - q.base);
    if (offset >= q.slots.size()) q.slots.resize(offset + 1);
    if (q.slots[offset].has_value())
      fail(ErrorCode::DuplicateFrame, "pts " + std::to_string(frame.pts) + " already buffered for view " +
                                          std::to_string(frame.view) + to_char(frame.rep));
    q.slots[offset] = frame;
    while (true) {
      const auto next = static_cast<std::size_t>(q.contiguous_end + 1 - q.base);
      if (next >= q.slots.size() || !q.slots[next].has_value()) break;
      ++q.contiguous_end;
    }
    std::int64_t w = std::numeric_limits<std::int64_t>::max();
    for (const auto& other : queues_) w = std::min(w, other.contiguous_end);
    watermark_.store(w, std::memory_order_release);
  }

  /// Highest PTS present in every queue (start_pts - 1 when nothing is complete).
  std::int64_t watermark() const noexcept { return watermark_.load(std::memory_order_acquire); }

  /// The frame at `pts`, or nothing if it is above the watermark or evicted.
  std::optional<Frame> find(int view, Representation rep, std::int64_t pts) const {
    if (view < 1 || view > n_views_ || pts > watermark()) return std::nullopt;
    std::shared_lock lock(mutex_);
    const Queue& q = queues_[index(view, rep)];
    if (pts < q.base) return std::nullopt;
    const auto offset = static_cast<std::size_t>(pts - q.base);
    if (offset >= q.slots.size()) return std::nullopt;
    return q.slots[offset];
  }

  /// Drops every frame with PTS below `pts`; later pushes below it are rejected.
  void evict_before(std::int64_t pts) {
    std::unique_lock lock(mutex_);
    for (auto& q : queues_) {
      while (q.base < pts) {
        if (!q.slots.empty()) q.slots.pop_front();
        ++q.base;
      }
      q.contiguous_end = std::max(q.contiguous_end, q.base - 1);
    }
  }

 private:
  struct Queue {
    std::int64_t base = 0;
    std::int64_t contiguous_end = -1;
    std::deque<std::optional<Frame>> slots;
  };

  std::size_t index(int view, Representation rep) const noexcept {
    return static_cast<std::size_t>(2 * (view - 1) + (rep == Representation::Constant ? 1 : 0));
  }
  Queue& queue(int view, Representation rep) { return queues_[index(view, rep)]; }

  int n_views_;
  std::vector<Queue> queues_;
  std::atomic<std::int64_t> watermark_;
  mutable std::shared_mutex mutex_;
};

}  // namespace varfvv
