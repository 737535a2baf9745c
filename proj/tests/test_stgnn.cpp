#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include <unistd.h>

#include "varfvv/stgnn.hpp"

using namespace varfvv;

namespace {

// ---- straight-line scalar references -----------------------------------

using Grid = std::vector<std::vector<double>>;

Grid to_grid(const Matrix& m) {
  Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  return g;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void softmax_rows(Grid& g) {
  for (auto& row : g) {
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double s = 0;
    for (double& v : row) s += (v = std::exp(v - mx));
    for (double& v : row) v /= s;
  }
}

Grid ref_spatial(const Grid& x, const BlockParams& b) {
  const std::size_t n = x.size(), t = x[0].size();
  Grid s(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double xw = 0;
    for (std::size_t k = 0; k < t; ++k) xw += x[i][k] * b.w1(k, 0);
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t c = 0; c < t; ++c) acc += xw * b.w2(0, c) * b.w3(0, 0) * x[j][c];
      s[i][j] = sig(acc + b.c_spatial(i, j));
    }
  }
  Grid y(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) y[i][j] += s[i][k] * b.v_spatial(k, j);
  softmax_rows(y);
  return y;
}

Grid ref_temporal(const Grid& x, const BlockParams& b) {
  const std::size_t n = x.size(), t = x[0].size();
  Grid s(t, std::vector<double>(t, 0.0));
  for (std::size_t a = 0; a < t; ++a) {
    double xu = 0;
    for (std::size_t i = 0; i < n; ++i) xu += x[i][a] * b.u1(i, 0);
    for (std::size_t c = 0; c < t; ++c) {
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) acc += xu * b.u2(0, i) * b.u3(0, 0) * x[i][c];
      s[a][c] = sig(acc + b.c_temporal(a, c));
    }
  }
  Grid z(t, std::vector<double>(t, 0.0));
  for (std::size_t a = 0; a < t; ++a)
    for (std::size_t c = 0; c < t; ++c)
      for (std::size_t k = 0; k < t; ++k) z[a][c] += s[a][k] * b.v_temporal(k, c);
  softmax_rows(z);
  return z;
}

Grid matmul(const Grid& a, const Grid& b) {
  Grid out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

/// Chebyshev terms T_1..T_order of the scaled Laplacian built from scratch
/// (eigen-decomposition for lambda_max).
std::vector<Grid> ref_terms(const Matrix& adjacency, int order) {
  const auto n = adjacency.rows();
  Matrix l = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double di = adjacency.row(i).sum(), dj = adjacency.row(j).sum();
      if (adjacency(i, j) != 0) l(i, j) = -adjacency(i, j) / std::sqrt(di * dj);
    }
  const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(l).eigenvalues().maxCoeff();
  Matrix lt = 2.0 / lmax * l - Matrix::Identity(n, n);
  std::vector<Grid> out;
  Grid prev = to_grid(Matrix::Identity(n, n)), cur = to_grid(lt);
  out.push_back(cur);
  for (int m = 2; m <= order; ++m) {
    Grid two_l_cur = matmul(to_grid(lt), cur);
    Grid next = cur;
    for (std::size_t i = 0; i < next.size(); ++i)
      for (std::size_t j = 0; j < next.size(); ++j) next[i][j] = 2 * two_l_cur[i][j] - prev[i][j];
    prev = cur;
    cur = next;
    out.push_back(cur);
  }
  return out;
}

Grid ref_cheb(const Grid& x, const Grid& att, const std::vector<Grid>& terms, const Matrix& s) {
  const std::size_t n = x.size(), t = x[0].size();
  Grid out(n, std::vector<double>(t, 0.0));
  for (std::size_t m = 0; m < terms.size(); ++m)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t c = 0; c < t; ++c) out[i][c] += s(m, 0) * terms[m][i][k] * att[i][k] * x[k][c];
  return out;
}

Grid ref_forward(const Grid& x0, const Matrix& adjacency, const GnnParams& p) {
  const auto terms = ref_terms(adjacency, p.cheb_order);
  Grid h = x0;
  for (const auto& b : p.blocks) {
    const Grid xa = matmul(h, ref_temporal(h, b));
    const Grid g = ref_cheb(xa, ref_spatial(xa, b), terms, b.cheb);
    const std::size_t n = g.size(), t = g[0].size();
    Grid out(n, std::vector<double>(t, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < t; ++c) {
        double v = b.tconv_bias(0, 0);
        for (int k = 0; k < 3; ++k) {
          const long src = static_cast<long>(c) + k - 1;
          if (src >= 0 && src < static_cast<long>(t)) v += b.tconv_kernel(0, k) * g[i][static_cast<std::size_t>(src)];
        }
        out[i][c] = std::max(0.0, v);
      }
    h = out;
  }
  const std::size_t n = h.size(), t = h[0].size(), d = static_cast<std::size_t>(p.horizon);
  Grid y(n, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t e = 0; e < d; ++e) {
      double v = p.fc_bias(0, e);
      for (std::size_t c = 0; c < t; ++c) v += h[i][c] * p.fc_weight(c, e);
      y[i][e] = p.out_weight(i, e) * std::max(0.0, v);
    }
  return y;
}

void expect_near(const Matrix& m, const Grid& g, double tol) {
  ASSERT_EQ(static_cast<std::size_t>(m.rows()), g.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) EXPECT_NEAR(m(r, c), g[r][c], tol) << r << "," << c;
}

Matrix random_matrix(int r, int c, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

TrainConfig small_cfg(int tau = 4, int blocks = 2) {
  TrainConfig c;
  c.tau = tau;
  c.blocks = blocks;
  return c;
}

}  // namespace

// ---- graph ------------------------------------------------------------------

TEST(ViewGraph, ScaledLaplacianSpectrumInUnitInterval) {
  for (int n : {2, 3, 5, 8, 23}) {
    auto g = ViewGraph::path(n);
    auto ev = Eigen::SelfAdjointEigenSolver<Matrix>(g.scaled_laplacian()).eigenvalues();
    EXPECT_GE(ev.minCoeff(), -1 - 1e-5) << n;
    EXPECT_LE(ev.maxCoeff(), 1 + 1e-5) << n;
    const double exact = Eigen::SelfAdjointEigenSolver<Matrix>(g.laplacian()).eigenvalues().maxCoeff();
    EXPECT_NEAR(g.lambda_max(), exact, 1e-5) << n;
  }
}

TEST(ViewGraph, PathOfTwoByHand) {
  // A = [[0,1],[1,0]], L = [[1,-1],[-1,1]], lambda_max = 2, L~ = L - I.
  auto g = ViewGraph::path(2);
  Matrix expected(2, 2);
  expected << 0, -1, -1, 0;
  EXPECT_TRUE(g.scaled_laplacian().isApprox(expected, 1e-6));
}

TEST(ViewGraph, ChebyshevRecurrence) {
  for (int n = 2; n <= 5; ++n) {
    auto g = ViewGraph::path(n);
    auto t = g.chebyshev_terms(2);
    const Matrix& l = g.scaled_laplacian();
    Matrix t2 = 2 * l * l - Matrix::Identity(n, n);
    EXPECT_TRUE(t[0].isApprox(l));
    EXPECT_TRUE(t[1].isApprox(t2, 1e-12));
  }
}

TEST(ViewGraph, RejectsAsymmetricAdjacency) {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = 1;
  EXPECT_THROW(ViewGraph{a}, Error);
}

namespace {

ErrorCode edges_error(const std::string& body, int n) {
  const auto path = std::filesystem::temp_directory_path() / ("varfvv_edges_" + std::to_string(::getpid()));
  std::ofstream(path) << body;
  try {
    ViewGraph::load_edges(path.string(), n);
  } catch (const Error& e) {
    std::filesystem::remove(path);
    return e.code();
  }
  std::filesystem::remove(path);
  ADD_FAILURE() << "no error for:\n" << body;
  return ErrorCode::Io;
}

}  // namespace

TEST(ViewGraph, LoadEdgesRing) {
  const auto path = std::filesystem::temp_directory_path() / ("varfvv_ring_" + std::to_string(::getpid()));
  std::ofstream(path) << "# ring\r\ni,j\r\n1,2\r\n2,3\r\n\n3,4\r\n4,1\r\n";
  const auto g = ViewGraph::load_edges(path.string(), 4);
  std::filesystem::remove(path);
  Matrix want = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) want(i, (i + 1) % 4) = want((i + 1) % 4, i) = 1;
  EXPECT_EQ(g.adjacency(), want);
}

TEST(ViewGraph, LoadEdgesErrors) {
  EXPECT_EQ(edges_error("1,2\n2;3\n", 4), ErrorCode::Parse);
  EXPECT_EQ(edges_error("1,2\nfrom,to\n", 4), ErrorCode::Parse);
  EXPECT_EQ(edges_error("1,2,3\n", 4), ErrorCode::Parse);
  EXPECT_EQ(edges_error("1,5\n", 4), ErrorCode::Validation);
  EXPECT_EQ(edges_error("2,2\n", 4), ErrorCode::Validation);
  try {
    ViewGraph::load_edges("/nonexistent/rig.edges", 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

// ---- attention ----------------------------------------------------------------

TEST(Attention, RowsSumToOne) {
  std::mt19937_64 rng(1);
  auto p = GnnParams::random(5, small_cfg(6), 9);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x = random_matrix(5, 6, rng, -3, 3);
    Matrix y = spatial_attention(x, p.blocks[0]);
    Matrix z = temporal_attention(x, p.blocks[1]);
    for (Eigen::Index r = 0; r < y.rows(); ++r) EXPECT_NEAR(y.row(r).sum(), 1.0, 1e-9);
    for (Eigen::Index r = 0; r < z.rows(); ++r) EXPECT_NEAR(z.row(r).sum(), 1.0, 1e-9);
  }
}

TEST(Attention, ZeroParametersGiveUniformRows) {
  auto p = GnnParams::zeros(4, small_cfg(3));
  std::mt19937_64 rng(2);
  Matrix x = random_matrix(4, 3, rng);
  EXPECT_TRUE(spatial_attention(x, p.blocks[0]).isApproxToConstant(0.25));
  EXPECT_TRUE(temporal_attention(x, p.blocks[0]).isApproxToConstant(1.0 / 3));
}

TEST(Attention, MatchesScalarReference) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = GnnParams::random(4, small_cfg(5), 100 + trial);
    Matrix x = random_matrix(4, 5, rng);
    expect_near(spatial_attention(x, p.blocks[0]), ref_spatial(to_grid(x), p.blocks[0]), 1e-12);
    expect_near(temporal_attention(x, p.blocks[0]), ref_temporal(to_grid(x), p.blocks[0]), 1e-12);
  }
}

TEST(Attention, ShapeMismatch) {
  auto p = GnnParams::random(4, small_cfg(5), 1);
  try {
    spatial_attention(Matrix::Zero(3, 5), p.blocks[0]);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Shape);
  }
  EXPECT_THROW(temporal_attention(Matrix::Zero(4, 4), p.blocks[0]), Error);
}

// ---- Chebyshev convolution -----------------------------------------------------

TEST(ChebConv, FirstOrderWithNeutralMaskIsLaplacianTimesX) {
  auto g = ViewGraph::path(4);
  std::mt19937_64 rng(4);
  Matrix x = random_matrix(4, 3, rng);
  Eigen::VectorXd s(1);
  s << 1.0;
  Matrix out = cheb_graph_conv(x, Matrix::Ones(4, 4), g.chebyshev_terms(1), s, 1);
  EXPECT_TRUE(out.isApprox(g.scaled_laplacian() * x, 1e-12));
}

TEST(ChebConv, PathOfTwoByHand) {
  auto g = ViewGraph::path(2);
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  Matrix att(2, 2);
  att << 0.3, 0.7, 0.6, 0.4;
  Eigen::VectorXd s(2);
  s << 2.0, -1.0;
  // T1 = [[0,-1],[-1,0]], T2 = 2 T1^2 - I = I.
  // s1 (T1 .* att) = [[0,-1.4],[-1.2,0]], s2 (T2 .* att) = [[-0.3,0],[0,-0.4]].
  Matrix k(2, 2);
  k << -0.3, -1.4, -1.2, -0.4;
  Matrix out = cheb_graph_conv(x, att, g.chebyshev_terms(2), s, 2);
  EXPECT_TRUE(out.isApprox(k * x, 1e-6));
}

TEST(ChebConv, SecondOrderMatchesScalarReference) {
  auto g = ViewGraph::path(5);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x = random_matrix(5, 4, rng);
    Matrix att = random_matrix(5, 5, rng, 0, 1);
    Eigen::VectorXd s = random_matrix(2, 1, rng);
    auto terms = ref_terms(g.adjacency(), 2);
    expect_near(cheb_graph_conv(x, att, g.chebyshev_terms(2), s, 2), ref_cheb(to_grid(x), to_grid(att), terms, s),
                1e-5);
  }
}

TEST(ChebConv, OrderBeyondTermsIsConfigError) {
  auto g = ViewGraph::path(3);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(3);
  try {
    cheb_graph_conv(Matrix::Zero(3, 2), Matrix::Ones(3, 3), g.chebyshev_terms(2), s, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
  }
}

// ---- forward -------------------------------------------------------------------

TEST(Forward, OutputShape) {
  TrainConfig c;
  auto p = GnnParams::random(48, c, 1);
  auto g = ViewGraph::path(48);
  Matrix out = stgnn_forward(Matrix::Constant(48, 10, 0.02), g, p);
  EXPECT_EQ(out.rows(), 48);
  EXPECT_EQ(out.cols(), 1);
  EXPECT_GE(out.minCoeff(), 0.0);
}

TEST(Forward, ZeroInputZeroBiasesGiveZero) {
  auto p = GnnParams::random(3, small_cfg(), 7);
  for (auto& b : p.blocks) b.tconv_bias.setZero();
  p.fc_bias.setZero();
  Matrix out = stgnn_forward(Matrix::Zero(3, 4), ViewGraph::path(3), p);
  EXPECT_TRUE(out.isZero());
}

TEST(Forward, MatchesScalarReference) {
  std::mt19937_64 rng(6);
  auto g = ViewGraph::path(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = GnnParams::random(3, small_cfg(), 50 + trial);
    Matrix x = random_matrix(3, 4, rng, 0, 2);
    expect_near(stgnn_forward(x, g, p), ref_forward(to_grid(x), g.adjacency(), p), 1e-5);
  }
}

TEST(Forward, NonFiniteInput) {
  auto p = GnnParams::random(3, small_cfg(), 1);
  Matrix x = Matrix::Zero(3, 4);
  x(1, 1) = std::nan("");
  try {
    stgnn_forward(x, ViewGraph::path(3), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteValue);
  }
  EXPECT_THROW(stgnn_forward(Matrix::Zero(3, 5), ViewGraph::path(3), p), Error);
}

// Relabeling views (with the adjacency) permutes the output identically when
// the node-indexed parameters are invariant under relabeling.
TEST(Forward, PermutationConsistency) {
  const int n = 6;
  std::mt19937_64 rng(8);
  Matrix a = Matrix::Zero(n, n);
  for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 3}})
    a(i, j) = a(j, i) = 1;
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
  perm.indices() << 3, 0, 5, 1, 4, 2;
  const Matrix pa = perm * a * perm.transpose();
  auto p = GnnParams::node_symmetric(n, small_cfg(5), 12);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix x = random_matrix(n, 5, rng, 0, 1);
    Matrix y = stgnn_forward(x, ViewGraph(a), p);
    Matrix py = stgnn_forward(perm * x, ViewGraph(pa), p);
    EXPECT_TRUE((perm * y).isApprox(py, 1e-9)) << trial;
  }
}

// ---- loss and gradients ------------------------------------------------------

TEST(Loss, ExactFitHasZeroLoss) {
  auto g = ViewGraph::path(3);
  auto p = GnnParams::random(3, small_cfg(), 4);
  std::mt19937_64 rng(9);
  Matrix x = random_matrix(3, 4, rng, 0, 1);
  Sample s{x, stgnn_forward(x, g, p)};
  auto lg = stgnn_loss_and_grad(std::span<const Sample>(&s, 1), g, p);
  EXPECT_EQ(lg.loss, 0.0);
  lg.grad.for_each([](const std::string& name, const Matrix& m) { EXPECT_TRUE(m.isZero()) << name; });
}

TEST(Loss, IsMeanAbsoluteError) {
  auto g = ViewGraph::path(3);
  auto p = GnnParams::random(3, small_cfg(), 4);
  std::mt19937_64 rng(10);
  std::vector<Sample> batch;
  double expected = 0;
  for (int k = 0; k < 3; ++k) {
    Matrix x = random_matrix(3, 4, rng, 0, 1);
    Matrix t = random_matrix(3, 1, rng, 0, 1);
    expected += (stgnn_forward(x, g, p) - t).cwiseAbs().mean() / 3;
    batch.push_back({x, t});
  }
  EXPECT_NEAR(stgnn_loss_and_grad(batch, g, p).loss, expected, 1e-14);
}

// Central differences, step 1e-5, every parameter entry.
TEST(Loss, GradientMatchesFiniteDifferences) {
  auto g = ViewGraph::path(3);
  std::mt19937_64 rng(11);
  for (int point = 0; point < 5; ++point) {
    auto p = GnnParams::random(3, small_cfg(), 200 + point);
    std::vector<Sample> batch;
    for (int k = 0; k < 2; ++k) batch.push_back({random_matrix(3, 4, rng, 0, 1), random_matrix(3, 1, rng, 0, 2)});
    const auto lg = stgnn_loss_and_grad(batch, g, p);
    std::vector<double> analytic, numeric;
    lg.grad.for_each([&](const std::string&, const Matrix& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) analytic.push_back(m.data()[i]);
    });
    GnnParams q = p;
    std::vector<double*> slots;
    q.for_each([&](const std::string&, Matrix& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) slots.push_back(m.data() + i);
    });
    const double h = 1e-5;
    for (double* v : slots) {
      const double keep = *v;
      *v = keep + h;
      const double up = stgnn_loss_and_grad(batch, g, q).loss;
      *v = keep - h;
      const double down = stgnn_loss_and_grad(batch, g, q).loss;
      *v = keep;
      numeric.push_back((up - down) / (2 * h));
    }
    double diff = 0, norm = 0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      diff += std::pow(analytic[k] - numeric[k], 2);
      norm += std::pow(numeric[k], 2);
    }
    EXPECT_LT(std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12), 1e-4) << "point " << point;
  }
}

// ---- training -----------------------------------------------------------------

TEST(Training, InsufficientHistory) {
  StgnnTrainer t(ViewGraph::path(3), small_cfg(), 1);
  std::vector<Eigen::VectorXd> one{Eigen::VectorXd::Zero(3)};
  try {
    t.initial_fit(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientHistory);
  }
}

TEST(Training, TenChunksSuffice) {
  TrainConfig c;
  std::vector<Eigen::VectorXd> series(10, Eigen::VectorXd::Constant(5, 0.05));
  EXPECT_NO_THROW(stgnn_train(series, ViewGraph::path(5), c, 1));
}

TEST(Training, DeterministicPerSeed) {
  TrainConfig c = small_cfg();
  c.epochs = 5;
  std::mt19937_64 rng(12);
  std::vector<Eigen::VectorXd> series;
  for (int j = 0; j < 20; ++j) series.push_back(random_matrix(3, 1, rng, 0, 0.3));
  auto a = stgnn_train(series, ViewGraph::path(3), c, 5);
  auto b = stgnn_train(series, ViewGraph::path(3), c, 5);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(a.history.epoch_mae, b.history.epoch_mae);
}

TEST(Training, LossDecreasesOnStationaryTrace) {
  const int n = 8;
  std::mt19937_64 rng(13);
  std::normal_distribution<double> noise(0, 0.0002);
  Eigen::VectorXd base(n);
  for (int i = 0; i < n; ++i) base(i) = 0.02 + 0.01 * (i % 3);
  std::vector<Eigen::VectorXd> series;
  for (int j = 0; j < 40; ++j) {
    Eigen::VectorXd v = base;
    for (int i = 0; i < n; ++i) v(i) += noise(rng);
    series.push_back(v.cwiseMax(0.0));
  }
  TrainConfig c;
  auto r = stgnn_train(series, ViewGraph::path(n), c, 3).history.epoch_mae;
  ASSERT_EQ(r.size(), 50u);
  double first = 0, last = 0;
  for (int e = 0; e < 10; ++e) first += r[e], last += r[40 + e];
  EXPECT_LT(last, first);
  EXPECT_LT(r.back(), 0.1 * r.front());
}

TEST(Checkpoint, RoundTripIsExact) {
  TrainConfig c = small_cfg(7, 3);
  c.cheb_order = 3;
  auto p = GnnParams::random(5, c, 77);
  std::stringstream ss;
  save_checkpoint(ss, p);
  auto q = load_checkpoint(ss);
  EXPECT_TRUE(p == q);
  EXPECT_EQ(p.parameter_count(), q.parameter_count());
}

TEST(Checkpoint, RejectsGarbage) {
  std::stringstream ss("varfvv-stgnn 1\nn_views 3\ntau 4\nhorizon 1\ncheb_order 2\nblocks 1\ntensor block0.w1 4 1\n0x1p+0 zz\n");
  try {
    load_checkpoint(ss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
  }
  std::stringstream bad("nonsense");
  EXPECT_THROW(load_checkpoint(bad), Error);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = GnnParams::zeros(2, small_cfg(2, 1));
  auto g = p;
  g.for_each([](const std::string&, Matrix& m) { m.setConstant(3.0); });
  AdamOptimizer opt(0.01);
  opt.step(p, g);
  p.for_each([](const std::string& name, const Matrix& m) { EXPECT_TRUE(m.isApproxToConstant(-0.01, 1e-6)) << name; });
}
