#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "varfvv/sync_buffer.hpp"

using namespace varfvv;

namespace {

Frame frame(int view, Representation rep, std::int64_t pts) {
  return Frame{view, rep, pts / 25, pts, FrameKind::P, 10};
}

void fill(SyncBuffer& b, int view, Representation rep, std::int64_t from, std::int64_t to) {
  for (auto p = from; p <= to; ++p) b.push(frame(view, rep, p));
}

}  // namespace

TEST(SyncBuffer, WatermarkNeedsBothRepresentations) {
  SyncBuffer b(1);
  EXPECT_EQ(b.watermark(), -1);
  b.push(frame(1, Representation::Switching, 0));
  EXPECT_EQ(b.watermark(), -1);
  EXPECT_FALSE(b.find(1, Representation::Switching, 0).has_value());
  b.push(frame(1, Representation::Constant, 0));
  EXPECT_EQ(b.watermark(), 0);
  EXPECT_TRUE(b.find(1, Representation::Switching, 0).has_value());
}

TEST(SyncBuffer, WatermarkIsMinimumOverQueues) {
  SyncBuffer b(2);
  fill(b, 1, Representation::Switching, 0, 10);
  fill(b, 1, Representation::Constant, 0, 10);
  fill(b, 2, Representation::Switching, 0, 10);
  fill(b, 2, Representation::Constant, 0, 7);
  EXPECT_EQ(b.watermark(), 7);
}

TEST(SyncBuffer, GapHoldsWatermark) {
  SyncBuffer b(1);
  fill(b, 1, Representation::Constant, 0, 5);
  b.push(frame(1, Representation::Switching, 0));
  b.push(frame(1, Representation::Switching, 2));
  EXPECT_EQ(b.watermark(), 0);
  b.push(frame(1, Representation::Switching, 1));
  EXPECT_EQ(b.watermark(), 2);
}

TEST(SyncBuffer, DuplicateFrame) {
  SyncBuffer b(1);
  b.push(frame(1, Representation::Constant, 3));
  try {
    b.push(frame(1, Representation::Constant, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateFrame);
  }
}

TEST(SyncBuffer, PushBelowEvictionFloorIsOutOfOrder) {
  SyncBuffer b(1);
  fill(b, 1, Representation::Constant, 0, 30);
  fill(b, 1, Representation::Switching, 0, 30);
  b.evict_before(25);
  EXPECT_FALSE(b.find(1, Representation::Constant, 24).has_value());
  EXPECT_TRUE(b.find(1, Representation::Constant, 25).has_value());
  try {
    b.push(frame(1, Representation::Constant, 10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfOrderFrame);
  }
}

TEST(SyncBuffer, InvalidView) {
  SyncBuffer b(2);
  try {
    b.push(frame(3, Representation::Constant, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidView);
  }
}

// Any arrival order of a full chunk ends at the same watermark and contents
// as sorted ingest.
TEST(SyncBuffer, PermutationMatchesSortedIngest) {
  const int n = 4, f = 25;
  std::vector<Frame> all;
  for (int v = 1; v <= n; ++v)
    for (auto rep : {Representation::Switching, Representation::Constant})
      for (int t = 0; t < f; ++t) all.push_back(Frame{v, rep, 0, t, t == 0 ? FrameKind::I : FrameKind::P, 100 + t + v});

  SyncBuffer sorted(n);
  for (const auto& fr : all) sorted.push(fr);
  ASSERT_EQ(sorted.watermark(), f - 1);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto shuffled = all;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    SyncBuffer b(n);
    for (std::size_t k = 0; k < shuffled.size(); ++k) {
      b.push(shuffled[k]);
      if (k + 1 < shuffled.size()) {
        ASSERT_LT(b.watermark(), f - 1);
      }
    }
    ASSERT_EQ(b.watermark(), f - 1);
    for (const auto& fr : all) ASSERT_EQ(b.find(fr.view, fr.rep, fr.pts), sorted.find(fr.view, fr.rep, fr.pts));
  }
}
