#pragma once

// Attention-based spatial-temporal graph network predicting the per-view
// popularity of the view-switching representations from a history window.
//
// Shapes (single input feature per node):
//   X        N x tau        history window, column c is chunk (j - tau + c)
//   Y'       N x N          spatial attention,  rows sum to one
//   Z'       tau x tau      temporal attention, rows sum to one
//   output   N x d          prediction for the next d chunks
//
// Contraction order used for the attention scores:
//   spatial   S = ((X w1) w2) (w3 X)^T            w1: tau x 1, w2: 1 x tau, w3: 1 x 1
//             Y' = softmax_rows(sigmoid(S + Cy) Vy)
//   temporal  S = ((X^T u1) u2) (u3 X^T)^T        u1: N x 1,   u2: 1 x N,   u3: 1 x 1
//             Z' = softmax_rows(sigmoid(S + Cz) Vz)
// One block:  Xa = X Z'
//             G  = sum_{m=1..M} s_m (T_m(L~) .* Y'(Xa)) Xa
//             H  = relu(conv3_same(G) + b)         kernel along the chunk axis
// Head:       P  = W .* relu(H Wfc + bfc)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "varfvv/autodiff.hpp"
#include "varfvv/error.hpp"
#include "varfvv/view_graph.hpp"

namespace varfvv {

using Matrix = Eigen::MatrixXd;

struct TrainConfig {
  int tau = 10;       // history length, chunks
  int horizon = 1;    // predicted chunks
  int cheb_order = 2;
  int blocks = 2;
  double learning_rate = 0.005;
  int batch_size = 32;
  int epochs = 50;         // initial training
  int online_epochs = 5;   // passes per new chunk in the online phase
  int online_window = 64;  // most recent samples kept for online updates
  double value_scale = 0;  // inputs/targets are multiplied by this; 0 means N

  void validate() const {
    require(tau >= 1 && horizon >= 1 && cheb_order >= 1, ErrorCode::Config, "tau, horizon and M must be >= 1");
    require(blocks >= 1, ErrorCode::Config, "need at least one block");
    require(learning_rate > 0 && batch_size >= 1 && epochs >= 0 && online_epochs >= 0 && online_window >= 1,
            ErrorCode::Config, "invalid optimizer settings");
    require(value_scale >= 0, ErrorCode::Config, "value_scale must be >= 0");
  }
};

struct BlockParams {
  Matrix w1, w2, w3, c_spatial, v_spatial;   // spatial attention
  Matrix u1, u2, u3, c_temporal, v_temporal; // temporal attention
  Matrix cheb;                               // s_1..s_M (M x 1)
  Matrix tconv_kernel, tconv_bias;           // 1 x 3, 1 x 1

  template <class Self, class F>
  static void visit(Self& b, F&& f) {
    f("w1", b.w1);
    f("w2", b.w2);
    f("w3", b.w3);
    f("c_spatial", b.c_spatial);
    f("v_spatial", b.v_spatial);
    f("u1", b.u1);
    f("u2", b.u2);
    f("u3", b.u3);
    f("c_temporal", b.c_temporal);
    f("v_temporal", b.v_temporal);
    f("cheb", b.cheb);
    f("tconv_kernel", b.tconv_kernel);
    f("tconv_bias", b.tconv_bias);
  }
};

struct GnnParams {
  int n_views = 0;
  int tau = 0;
  int horizon = 0;
  int cheb_order = 0;
  std::vector<BlockParams> blocks;
  Matrix fc_weight;   // tau x d
  Matrix fc_bias;     // 1 x d
  Matrix out_weight;  // N x d

  /// All-zero parameters of the right shapes.
  static GnnParams zeros(int n_views, const TrainConfig& cfg) {
    cfg.validate();
    GnnParams p;
    p.n_views = n_views;
    p.tau = cfg.tau;
    p.horizon = cfg.horizon;
    p.cheb_order = cfg.cheb_order;
    const int n = n_views, t = cfg.tau;
    for (int b = 0; b < cfg.blocks; ++b) {
      BlockParams bp;
      bp.w1 = Matrix::Zero(t, 1);
      bp.w2 = Matrix::Zero(1, t);
      bp.w3 = Matrix::Zero(1, 1);
      bp.c_spatial = Matrix::Zero(n, n);
      bp.v_spatial = Matrix::Zero(n, n);
      bp.u1 = Matrix::Zero(n, 1);
      bp.u2 = Matrix::Zero(1, n);
      bp.u3 = Matrix::Zero(1, 1);
      bp.c_temporal = Matrix::Zero(t, t);
      bp.v_temporal = Matrix::Zero(t, t);
      bp.cheb = Matrix::Zero(cfg.cheb_order, 1);
      bp.tconv_kernel = Matrix::Zero(1, 3);
      bp.tconv_bias = Matrix::Zero(1, 1);
      p.blocks.push_back(std::move(bp));
    }
    p.fc_weight = Matrix::Zero(t, cfg.horizon);
    p.fc_bias = Matrix::Zero(1, cfg.horizon);
    p.out_weight = Matrix::Zero(n, cfg.horizon);
    return p;
  }

  /// Random initialization. Attention and output weights start near the
  /// identity-like regime so the first epochs do not sit on dead ReLUs.
  static GnnParams random(int n_views, const TrainConfig& cfg, std::uint64_t seed) {
    GnnParams p = zeros(n_views, cfg);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto fill = [&](Matrix& m, double mean, double sd) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = mean + sd * noise(rng);
    };
    for (auto& b : p.blocks) {
      fill(b.w1, 0.0, 0.3);
      fill(b.w2, 0.0, 0.3);
      fill(b.w3, 0.0, 0.3);
      fill(b.c_spatial, 0.0, 0.1);
      fill(b.v_spatial, 0.0, 0.1);
      fill(b.u1, 0.0, 0.3);
      fill(b.u2, 0.0, 0.3);
      fill(b.u3, 0.0, 0.3);
      fill(b.c_temporal, 0.0, 0.1);
      fill(b.v_temporal, 0.0, 0.1);
      fill(b.cheb, 0.0, 0.5);
      fill(b.tconv_kernel, 0.4, 0.1);
      fill(b.tconv_bias, 0.1, 0.02);
    }
    fill(p.fc_weight, 1.0 / cfg.tau, 0.1);
    fill(p.fc_bias, 0.1, 0.02);
    fill(p.out_weight, 1.0, 0.1);
    return p;
  }

  /// Initialization whose node-indexed tensors are invariant under view
  /// relabeling (constant vectors, a*I + b*11^T matrices).
  static GnnParams node_symmetric(int n_views, const TrainConfig& cfg, std::uint64_t seed) {
    GnnParams p = random(n_views, cfg, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> noise(0.0, 0.3);
    const int n = n_views;
    auto symmetric = [&](Matrix& m) {
      m = noise(rng) * Matrix::Identity(n, n) + noise(rng) * Matrix::Ones(n, n);
    };
    for (auto& b : p.blocks) {
      symmetric(b.c_spatial);
      symmetric(b.v_spatial);
      b.u1 = Matrix::Constant(n, 1, noise(rng));
      b.u2 = Matrix::Constant(1, n, noise(rng));
    }
    for (Eigen::Index d = 0; d < p.out_weight.cols(); ++d) p.out_weight.col(d).setConstant(1.0 + noise(rng));
    return p;
  }

  template <class F>
  void for_each(F&& f) {
    for (std::size_t b = 0; b < blocks.size(); ++b)
      BlockParams::visit(blocks[b], [&](const char* name, Matrix& m) {
        f("block" + std::to_string(b) + "." + name, m);
      });
    f(std::string("fc_weight"), fc_weight);
    f(std::string("fc_bias"), fc_bias);
    f(std::string("out_weight"), out_weight);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<GnnParams&>(*this).for_each([&](const std::string& name, Matrix& m) { f(name, std::as_const(m)); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  bool operator==(const GnnParams& o) const {
    if (n_views != o.n_views || tau != o.tau || horizon != o.horizon || cheb_order != o.cheb_order ||
        blocks.size() != o.blocks.size())
      return false;
    std::vector<const Matrix*> mine, theirs;
    for_each([&](const std::string&, const Matrix& m) { mine.push_back(&m); });
    o.for_each([&](const std::string&, const Matrix& m) { theirs.push_back(&m); });
    for (std::size_t i = 0; i < mine.size(); ++i)
      if (mine[i]->rows() != theirs[i]->rows() || mine[i]->cols() != theirs[i]->cols() || *mine[i] != *theirs[i])
        return false;
    return true;
  }
};

namespace stgnn_detail {

struct BlockVars {
  ad::Var w1, w2, w3, c_spatial, v_spatial, u1, u2, u3, c_temporal, v_temporal, cheb, kernel, bias;
};

struct ModelVars {
  std::vector<BlockVars> blocks;
  ad::Var fc_weight, fc_bias, out_weight;
  std::vector<std::size_t> order;  // tape index of every tensor, in for_each order
};

inline ModelVars bind(ad::Tape& tape, const GnnParams& p, bool trainable) {
  ModelVars mv;
  auto make = [&](const Matrix& m) {
    ad::Var v = trainable ? tape.leaf(m) : tape.constant(m);
    mv.order.push_back(v.index());
    return v;
  };
  for (const auto& b : p.blocks) {
    BlockVars bv;
    bv.w1 = make(b.w1);
    bv.w2 = make(b.w2);
    bv.w3 = make(b.w3);
    bv.c_spatial = make(b.c_spatial);
    bv.v_spatial = make(b.v_spatial);
    bv.u1 = make(b.u1);
    bv.u2 = make(b.u2);
    bv.u3 = make(b.u3);
    bv.c_temporal = make(b.c_temporal);
    bv.v_temporal = make(b.v_temporal);
    bv.cheb = make(b.cheb);
    bv.kernel = make(b.tconv_kernel);
    bv.bias = make(b.tconv_bias);
    mv.blocks.push_back(bv);
  }
  mv.fc_weight = make(p.fc_weight);
  mv.fc_bias = make(p.fc_bias);
  mv.out_weight = make(p.out_weight);
  return mv;
}

inline ad::Var spatial_attention(ad::Var x, const BlockVars& b) {
  using namespace ad;
  Var left = matmul(matmul(x, b.w1), b.w2);
  Var right = scale(b.w3, x);
  Var score = matmul(left, transpose(right));
  return softmax_rows(matmul(sigmoid(add(score, b.c_spatial)), b.v_spatial));
}

inline ad::Var temporal_attention(ad::Var x, const BlockVars& b) {
  using namespace ad;
  Var xt = transpose(x);
  Var left = matmul(matmul(xt, b.u1), b.u2);
  Var right = scale(b.u3, xt);
  Var score = matmul(left, transpose(right));
  return softmax_rows(matmul(sigmoid(add(score, b.c_temporal)), b.v_temporal));
}

inline ad::Var cheb_conv(ad::Var x, ad::Var attention, const std::vector<ad::Var>& terms, ad::Var cheb) {
  using namespace ad;
  Var acc;
  for (std::size_t m = 0; m < terms.size(); ++m) {
    Var term = scale(element(cheb, static_cast<Eigen::Index>(m), 0), matmul(hadamard(terms[m], attention), x));
    acc = m == 0 ? term : add(acc, term);
  }
  return acc;
}

inline ad::Var block(ad::Var x, const BlockVars& b, const std::vector<ad::Var>& terms) {
  using namespace ad;
  Var z = temporal_attention(x, b);
  Var xa = matmul(x, z);
  Var y = spatial_attention(xa, b);
  Var g = cheb_conv(xa, y, terms, b.cheb);
  return relu(conv_rows_same(g, b.kernel, b.bias));
}

inline std::vector<ad::Var> constants(ad::Tape& tape, const std::vector<Matrix>& terms) {
  std::vector<ad::Var> out;
  for (const auto& t : terms) out.push_back(tape.constant(t));
  return out;
}

inline ad::Var forward(ad::Tape& tape, const ModelVars& mv, const Matrix& x, const std::vector<ad::Var>& terms) {
  using namespace ad;
  Var h = tape.constant(x);
  for (const auto& b : mv.blocks) h = block(h, b, terms);
  Var fc = add_row(matmul(h, mv.fc_weight), mv.fc_bias);
  return hadamard(mv.out_weight, relu(fc));
}

inline void check_finite(const Matrix& m, const char* what) {
  require(m.allFinite(), ErrorCode::NonFiniteValue, std::string(what) + " is not finite");
}

inline void check_input(const GnnParams& p, const Matrix& x) {
  require(x.rows() == p.n_views && x.cols() == p.tau, ErrorCode::Shape,
          "history window must be " + std::to_string(p.n_views) + "x" + std::to_string(p.tau));
  check_finite(x, "history window");
}

inline std::vector<Matrix> graph_terms(const ViewGraph& graph, const GnnParams& p) {
  require(graph.size() == p.n_views, ErrorCode::Shape, "graph size differs from model view count");
  return graph.chebyshev_terms(p.cheb_order);
}

}  // namespace stgnn_detail

/// Spatial attention Y' (N x N) of one block on window X (N x tau).
inline Matrix spatial_attention(const Matrix& x, const BlockParams& b) {
  require(b.w1.rows() == x.cols() && b.c_spatial.rows() == x.rows(), ErrorCode::Shape,
          "spatial attention: window shape does not match parameters");
  ad::Tape tape;
  GnnParams holder;
  holder.blocks.push_back(b);
  auto mv = stgnn_detail::bind(tape, holder, false);
  return stgnn_detail::spatial_attention(tape.constant(x), mv.blocks[0]).value();
}

/// Temporal attention Z' (tau x tau) of one block on window X (N x tau).
inline Matrix temporal_attention(const Matrix& x, const BlockParams& b) {
  require(b.u1.rows() == x.rows() && b.c_temporal.rows() == x.cols(), ErrorCode::Shape,
          "temporal attention: window shape does not match parameters");
  ad::Tape tape;
  GnnParams holder;
  holder.blocks.push_back(b);
  auto mv = stgnn_detail::bind(tape, holder, false);
  return stgnn_detail::temporal_attention(tape.constant(x), mv.blocks[0]).value();
}

/// sum_{m=1..M} s_m (T_m(L~) .* Y') X using the first M Chebyshev terms.
inline Matrix cheb_graph_conv(const Matrix& x, const Matrix& attention, const std::vector<Matrix>& terms,
                              const Eigen::VectorXd& s, int order) {
  require(order >= 1 && static_cast<std::size_t>(order) <= terms.size() && s.size() >= order, ErrorCode::Config,
          "Chebyshev order exceeds precomputed terms");
  require(attention.rows() == x.rows() && attention.cols() == x.rows(), ErrorCode::Shape,
          "attention must be N x N");
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (int m = 0; m < order; ++m) out += s(m) * (terms[static_cast<std::size_t>(m)].cwiseProduct(attention) * x);
  return out;
}

/// Forward pass: window X (N x tau) -> prediction (N x d).
inline Matrix stgnn_forward(const Matrix& x, const ViewGraph& graph, const GnnParams& params) {
  stgnn_detail::check_input(params, x);
  ad::Tape tape;
  auto mv = stgnn_detail::bind(tape, params, false);
  auto terms = stgnn_detail::constants(tape, stgnn_detail::graph_terms(graph, params));
  Matrix out = stgnn_detail::forward(tape, mv, x, terms).value();
  stgnn_detail::check_finite(out, "prediction");
  return out;
}

struct Sample {
  Matrix input;   // N x tau
  Matrix target;  // N x d
};

struct LossAndGrad {
  double loss = 0;
  GnnParams grad;
};

/// Mean absolute error averaged over the batch (and over views and horizon),
/// with gradients for every parameter tensor.
inline LossAndGrad stgnn_loss_and_grad(std::span<const Sample> batch, const ViewGraph& graph,
                                       const GnnParams& params) {
  require(!batch.empty(), ErrorCode::Shape, "empty batch");
  const auto base_terms = stgnn_detail::graph_terms(graph, params);
  LossAndGrad out{0.0, params};
  out.grad.for_each([](const std::string&, Matrix& m) { m.setZero(); });
  std::vector<Matrix*> grads;
  out.grad.for_each([&](const std::string&, Matrix& m) { grads.push_back(&m); });

  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    stgnn_detail::check_input(params, s.input);
    require(s.target.rows() == params.n_views && s.target.cols() == params.horizon, ErrorCode::Shape,
            "target must be N x d");
    ad::Tape tape;
    auto mv = stgnn_detail::bind(tape, params, true);
    auto terms = stgnn_detail::constants(tape, base_terms);
    ad::Var pred = stgnn_detail::forward(tape, mv, s.input, terms);
    ad::Var loss = ad::mean_abs_error(pred, s.target);
    tape.backward(loss);
    out.loss += inv * loss.value()(0, 0);
    for (std::size_t k = 0; k < grads.size(); ++k) *grads[k] += inv * tape.grad(mv.order[k]);
  }
  require(std::isfinite(out.loss), ErrorCode::NonFiniteValue, "loss is not finite");
  out.grad.for_each([](const std::string&, const Matrix& m) { stgnn_detail::check_finite(m, "gradient"); });
  return out;
}

/// Adam on every tensor of a GnnParams.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(GnnParams& params, const GnnParams& grad) {
    if (m_.empty()) {
      params.for_each([&](const std::string&, const Matrix& p) {
        m_.push_back(Matrix::Zero(p.rows(), p.cols()));
        v_.push_back(Matrix::Zero(p.rows(), p.cols()));
      });
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_), c2 = 1.0 - std::pow(beta2_, t_);
    std::vector<const Matrix*> g;
    grad.for_each([&](const std::string&, const Matrix& m) { g.push_back(&m); });
    std::size_t k = 0;
    params.for_each([&](const std::string&, Matrix& p) {
      m_[k] = beta1_ * m_[k] + (1 - beta1_) * *g[k];
      v_[k] = beta2_ * v_[k] + (1 - beta2_) * g[k]->cwiseAbs2();
      p.array() -= lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
      ++k;
    });
  }

  long steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Training pairs from a popularity series (one N-vector per chunk). The
/// window for target chunk k covers chunks k - tau .. k - 1; chunks before
/// the start of the series are zero. Needs at least d + 1 chunks.
inline std::vector<Sample> make_samples(const std::vector<Eigen::VectorXd>& series, int tau, int horizon,
                                        double scale = 1.0) {
  const int len = static_cast<int>(series.size());
  if (len < horizon + 1)
    fail(ErrorCode::InsufficientHistory,
         "need at least " + std::to_string(horizon + 1) + " chunks, have " + std::to_string(len));
  const auto n = series.front().size();
  std::vector<Sample> out;
  for (int k = 1; k + horizon <= len; ++k) {
    Sample s{Matrix::Zero(n, tau), Matrix::Zero(n, horizon)};
    for (int c = 0; c < tau; ++c) {
      const int chunk = k - tau + c;
      if (chunk >= 0) s.input.col(c) = scale * series[static_cast<std::size_t>(chunk)];
    }
    for (int d = 0; d < horizon; ++d) s.target.col(d) = scale * series[static_cast<std::size_t>(k + d)];
    out.push_back(std::move(s));
  }
  return out;
}

/// Window ending at the last chunk of `series` (for predicting the next chunk).
inline Matrix latest_window(const std::vector<Eigen::VectorXd>& series, int n_views, int tau, double scale = 1.0) {
  Matrix x = Matrix::Zero(n_views, tau);
  const int len = static_cast<int>(series.size());
  for (int c = 0; c < tau; ++c) {
    const int chunk = len - tau + c;
    if (chunk >= 0) x.col(c) = scale * series[static_cast<std::size_t>(chunk)];
  }
  return x;
}

struct TrainingResult {
  std::vector<double> epoch_mae;  // mean training MAE per epoch, unscaled
};

/// Owns a model, its optimizer state and the online training set.
class StgnnTrainer {
 public:
  StgnnTrainer(ViewGraph graph, TrainConfig cfg, std::uint64_t seed)
      : graph_(std::move(graph)),
        cfg_(cfg),
        params_(GnnParams::random(graph_.size(), cfg, seed)),
        optimizer_(cfg.learning_rate),
        rng_(seed + 1) {
    cfg_.validate();
  }

  StgnnTrainer(ViewGraph graph, TrainConfig cfg, GnnParams params, std::uint64_t seed)
      : graph_(std::move(graph)), cfg_(cfg), params_(std::move(params)), optimizer_(cfg.learning_rate), rng_(seed + 1) {
    cfg_.validate();
    require(params_.n_views == graph_.size() && params_.tau == cfg_.tau && params_.horizon == cfg_.horizon &&
                params_.cheb_order == cfg_.cheb_order && static_cast<int>(params_.blocks.size()) == cfg_.blocks,
            ErrorCode::Config, "checkpoint shapes do not match the training configuration");
  }

  const GnnParams& params() const noexcept { return params_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  const ViewGraph& graph() const noexcept { return graph_; }
  double scale() const noexcept { return cfg_.value_scale > 0 ? cfg_.value_scale : graph_.size(); }
  bool trained() const noexcept { return trained_; }

  /// Initial training: `cfg.epochs` passes over all samples of `series`.
  TrainingResult initial_fit(const std::vector<Eigen::VectorXd>& series) {
    auto samples = make_samples(series, cfg_.tau, cfg_.horizon, scale());
    auto r = run_epochs(samples, cfg_.epochs);
    trained_ = true;
    return r;
  }

  /// Online phase: the newest chunk has been appended to `series`; refit on
  /// the most recent `online_window` samples.
  TrainingResult online_update(const std::vector<Eigen::VectorXd>& series) {
    auto samples = make_samples(series, cfg_.tau, cfg_.horizon, scale());
    if (samples.size() > static_cast<std::size_t>(cfg_.online_window))
      samples.erase(samples.begin(), samples.end() - cfg_.online_window);
    trained_ = true;
    return run_epochs(samples, cfg_.online_epochs);
  }

  /// Prediction (N x d, unscaled) for the chunks following `series`.
  Matrix predict(const std::vector<Eigen::VectorXd>& series) const {
    const Matrix x = latest_window(series, graph_.size(), cfg_.tau, scale());
    return stgnn_forward(x, graph_, params_) / scale();
  }

  double evaluate_mae(std::span<const Sample> samples) const {
    double total = 0;
    for (const auto& s : samples)
      total += (stgnn_forward(s.input, graph_, params_) - s.target).cwiseAbs().mean();
    return samples.empty() ? 0.0 : total / static_cast<double>(samples.size()) / scale();
  }

 private:
  TrainingResult run_epochs(std::vector<Sample>& samples, int epochs) {
    TrainingResult r;
    std::vector<std::size_t> order(samples.size());
    for (int e = 0; e < epochs; ++e) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng_);
      double weighted = 0;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg_.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg_.batch_size));
        std::vector<Sample> batch;
        for (std::size_t k = start; k < end; ++k) batch.push_back(samples[order[k]]);
        auto lg = stgnn_loss_and_grad(batch, graph_, params_);
        weighted += lg.loss * static_cast<double>(batch.size());
        optimizer_.step(params_, lg.grad);
      }
      r.epoch_mae.push_back(weighted / static_cast<double>(samples.size()) / scale());
    }
    return r;
  }

  ViewGraph graph_;
  TrainConfig cfg_;
  GnnParams params_;
  AdamOptimizer optimizer_;
  std::mt19937_64 rng_;
  bool trained_ = false;
};

struct TrainedModel {
  GnnParams params;
  TrainingResult history;
};

/// Initial training on a popularity history.
inline TrainedModel stgnn_train(const std::vector<Eigen::VectorXd>& history, const ViewGraph& graph,
                                const TrainConfig& cfg, std::uint64_t seed) {
  StgnnTrainer trainer(graph, cfg, seed);
  auto result = trainer.initial_fit(history);
  return {trainer.params(), std::move(result)};
}

// Checkpoint: text, one header line "varfvv-stgnn 1", key/value shape lines,
// then "tensor <name> <rows> <cols>" followed by row-major hexfloat values.
inline void save_checkpoint(std::ostream& os, const GnnParams& p) {
  os << "varfvv-stgnn 1\n";
  os << "n_views " << p.n_views << "\ntau " << p.tau << "\nhorizon " << p.horizon << "\ncheb_order "
     << p.cheb_order << "\nblocks " << p.blocks.size() << '\n';
  p.for_each([&](const std::string& name, const Matrix& m) {
    os << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    std::ostringstream line;
    line << std::hexfloat;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) line << (r + c ? " " : "") << m(r, c);
    os << line.str() << '\n';
  });
  os << "end\n";
}

inline GnnParams load_checkpoint(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  require(magic == "varfvv-stgnn" && version == 1, ErrorCode::Parse, "not a varfvv-stgnn v1 checkpoint");
  auto read_key = [&](const char* key) {
    std::string k;
    long v = 0;
    is >> k >> v;
    require(static_cast<bool>(is) && k == key, ErrorCode::Parse, std::string("checkpoint: expected ") + key);
    return static_cast<int>(v);
  };
  TrainConfig cfg;
  const int n = read_key("n_views");
  cfg.tau = read_key("tau");
  cfg.horizon = read_key("horizon");
  cfg.cheb_order = read_key("cheb_order");
  cfg.blocks = read_key("blocks");
  GnnParams p = GnnParams::zeros(n, cfg);
  p.for_each([&](const std::string& name, Matrix& m) {
    std::string word, got;
    long rows = 0, cols = 0;
    is >> word >> got >> rows >> cols;
    require(static_cast<bool>(is) && word == "tensor" && got == name && rows == m.rows() && cols == m.cols(),
            ErrorCode::Parse, "checkpoint: bad tensor header for " + name);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        std::string tok;
        is >> tok;
        char* end = nullptr;
        m(r, c) = std::strtod(tok.c_str(), &end);
        require(!tok.empty() && end && *end == '\0', ErrorCode::Parse, "checkpoint: bad value in " + name);
      }
  });
  std::string tail;
  is >> tail;
  require(tail == "end", ErrorCode::Parse, "checkpoint: missing end marker");
  return p;
}

inline void save_checkpoint(const std::string& path, const GnnParams& p) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + path);
  save_checkpoint(os, p);
  require(static_cast<bool>(os), ErrorCode::Io, "write failed for " + path);
}

inline GnnParams load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + path);
  return load_checkpoint(is);
}

}  // namespace varfvv
