#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "varfvv/popularity.hpp"

using namespace varfvv;

namespace {

Frame fr(int view, Representation rep, std::int64_t pts) {
  return Frame{view, rep, pts / 25, pts, FrameKind::I, 1};
}

std::vector<Frame> constant_chunk(int view, std::int64_t chunk) {
  std::vector<Frame> out;
  for (int t = 0; t < 25; ++t) out.push_back(fr(view, Representation::Constant, chunk * 25 + t));
  return out;
}

}  // namespace

TEST(ActualPopularity, SingleConstantUser) {
  std::vector<std::vector<Frame>> logs{constant_chunk(2, 0)};
  auto a = compute_actual_popularity(logs, 3, 0);
  EXPECT_FALSE(a.empty);
  EXPECT_EQ(a.x, Vector((Vector(3) << 0, 1, 0).finished()));
  EXPECT_TRUE(a.x_hat.isZero());
}

// One user constant on view 1; the other joins at t=0 on S_1 and sweeps
// 1 -> 2 -> 3 (one S frame each), then stays on S_3 until the chunk ends.
TEST(ActualPopularity, ConstantAndSweepingUser) {
  std::vector<Frame> sweeper;
  sweeper.push_back(fr(1, Representation::Switching, 0));
  sweeper.push_back(fr(2, Representation::Switching, 1));
  for (int t = 2; t < 25; ++t) sweeper.push_back(fr(3, Representation::Switching, t));
  std::vector<std::vector<Frame>> logs{constant_chunk(1, 0), sweeper};
  auto a = compute_actual_popularity(logs, 3, 0);
  EXPECT_DOUBLE_EQ(a.x(0), 0.5);
  EXPECT_DOUBLE_EQ(a.x(1), 0.0);
  EXPECT_DOUBLE_EQ(a.x(2), 0.0);
  EXPECT_DOUBLE_EQ(a.x_hat(0), 1.0 / 50);
  EXPECT_DOUBLE_EQ(a.x_hat(1), 1.0 / 50);
  EXPECT_DOUBLE_EQ(a.x_hat(2), 23.0 / 50);
  EXPECT_NEAR(a.x.sum() + a.x_hat.sum(), 1.0, 1e-15);
}

TEST(ActualPopularity, UserOrderDoesNotMatter) {
  std::vector<std::vector<Frame>> logs{constant_chunk(1, 3), constant_chunk(4, 3), constant_chunk(4, 2)};
  logs[1][7].rep = Representation::Switching;
  auto a = compute_actual_popularity(logs, 4, 3);
  std::reverse(logs.begin(), logs.end());
  auto b = compute_actual_popularity(logs, 4, 3);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.x_hat, b.x_hat);
  EXPECT_EQ(a.frames, 50);
}

TEST(ActualPopularity, EmptyChunkIsFlagged) {
  std::vector<std::vector<Frame>> logs{constant_chunk(1, 0)};
  auto a = compute_actual_popularity(logs, 2, 5);
  EXPECT_TRUE(a.empty);
  EXPECT_TRUE(a.x.isZero());
  EXPECT_TRUE(a.x_hat.isZero());
}

TEST(Ppc, CarriesOver) {
  ChunkPopularity prev{0, (Vector(2) << 0.2, 0.8).finished(), Vector::Zero(2), 25, false};
  auto p = ppc_predict(prev, 2);
  EXPECT_FALSE(p.cold_start);
  EXPECT_EQ(p.p, prev.x);
  EXPECT_EQ(p.p_hat, prev.x_hat);
}

TEST(Ppc, ColdStartIsUniform) {
  auto p = ppc_predict(std::nullopt, 4);
  EXPECT_TRUE(p.cold_start);
  EXPECT_TRUE(p.p.isApproxToConstant(0.25));
  EXPECT_TRUE(p.p_hat.isZero());
}

TEST(Ppc, StationaryTraceHasPrecisionOne) {
  std::vector<std::vector<Frame>> logs0{constant_chunk(1, 0), constant_chunk(3, 0)};
  std::vector<std::vector<Frame>> logs1{constant_chunk(1, 1), constant_chunk(3, 1)};
  auto a0 = compute_actual_popularity(logs0, 3, 0);
  auto a1 = compute_actual_popularity(logs1, 3, 1);
  EXPECT_DOUBLE_EQ(precision(ppc_predict(a0, 3), a1), 1.0);
}

TEST(Precision, Examples) {
  std::vector<double> p{1}, ph{0}, x{0}, xh{1};
  EXPECT_DOUBLE_EQ(precision(p, ph, x, xh), 0.0);
  std::vector<double> a{0.1, 0.2}, b{0.3, 0.4};
  EXPECT_DOUBLE_EQ(precision(a, b, a, b), 1.0);
  std::vector<double> shorter{0.1};
  try {
    precision(a, b, shorter, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Shape);
  }
}

TEST(Precision, RandomAgainstScalarFormula) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 9;
    std::vector<double> p(n), ph(n), x(n), xh(n);
    for (int i = 0; i < n; ++i) p[i] = u(rng), ph[i] = u(rng), x[i] = u(rng), xh[i] = u(rng);
    double ss = 0;
    for (int i = 0; i < n; ++i) ss += std::pow(p[i] - x[i], 2) + std::pow(ph[i] - xh[i], 2);
    const double expected = 1.0 - std::sqrt(ss / (2.0 * n));
    EXPECT_NEAR(precision(p, ph, x, xh), expected, 1e-14);
    EXPECT_LE(precision(p, ph, x, xh), 1.0);
  }
}

TEST(Normalize, ClampsAndRescalesJointly) {
  PopularityPrediction pred{(Vector(3) << 0.5, -0.2, 0.3).finished(), (Vector(3) << 0.4, 0.0, -1.0).finished(), false};
  normalize_prediction(pred, 0.8);
  EXPECT_GE(pred.p.minCoeff(), 0.0);
  EXPECT_GE(pred.p_hat.minCoeff(), 0.0);
  EXPECT_NEAR(pred.p.sum() + pred.p_hat.sum(), 0.8, 1e-15);
  EXPECT_NEAR(pred.p(0) / pred.p_hat(0), 0.5 / 0.4, 1e-12);
}

TEST(Normalize, AllZeroBecomesUniform) {
  PopularityPrediction pred{Vector::Constant(4, -1), Vector::Zero(4), false};
  normalize_prediction(pred);
  EXPECT_TRUE(pred.p.isApproxToConstant(0.25));
  EXPECT_TRUE(pred.p_hat.isZero());
}

TEST(PredictPopularity, ConstantUsersGivePpcForConstant) {
  PopularityHistory h;
  for (int j = 0; j < 12; ++j) {
    h.x.push_back((Vector(3) << 0.5, 0.25, 0.25).finished());
    h.x_hat.push_back(Vector::Zero(3));
  }
  TrainConfig tc;
  tc.epochs = 20;
  StgnnTrainer gnn(ViewGraph::path(3), tc, 3);
  gnn.initial_fit(h.x_hat);
  auto pred = predict_popularity(h, 3, PredictorKind::Combined, &gnn);
  EXPECT_LT(pred.p_hat.maxCoeff(), 0.02);
  EXPECT_NEAR(pred.p.sum() + pred.p_hat.sum(), 1.0, 1e-12);
  EXPECT_LT((pred.p - h.x.back()).cwiseAbs().maxCoeff(), 0.02);
}

TEST(PredictPopularity, UntrainedGnnFallsBackToPpc) {
  PopularityHistory h;
  h.x.push_back((Vector(2) << 0.3, 0.2).finished());
  h.x_hat.push_back((Vector(2) << 0.1, 0.4).finished());
  StgnnTrainer gnn(ViewGraph::path(2), TrainConfig{}, 1);
  auto a = predict_popularity(h, 2, PredictorKind::Combined, &gnn);
  auto b = predict_popularity(h, 2, PredictorKind::Ppc, nullptr);
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.p_hat, b.p_hat);
  EXPECT_EQ(b.p, h.x.back());
}

TEST(PredictPopularity, ColdStart) {
  PopularityHistory h;
  auto a = predict_popularity(h, 5, PredictorKind::Combined, nullptr);
  EXPECT_TRUE(a.cold_start);
}

// Uniform sweeping traffic: every view equally popular in S.
TEST(PredictPopularity, UniformSweepTrafficGivesNearUniformPrediction) {
  const int n = 6;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0, 0.005);
  PopularityHistory h;
  for (int j = 0; j < 30; ++j) {
    Vector xh(n);
    for (int i = 0; i < n; ++i) xh(i) = 0.1 + noise(rng);
    h.x_hat.push_back(xh);
    h.x.push_back(Vector::Constant(n, (1.0 - xh.sum()) / n));
  }
  StgnnTrainer gnn(ViewGraph::path(n), TrainConfig{}, 2);
  gnn.initial_fit(h.x_hat);
  auto pred = predict_popularity(h, n, PredictorKind::Combined, &gnn);
  EXPECT_LT(pred.p_hat.maxCoeff() - pred.p_hat.minCoeff(), 0.05);
  EXPECT_NEAR(pred.p.sum() + pred.p_hat.sum(), 1.0, 1e-12);
}
