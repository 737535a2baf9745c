#pragma once

// Per-chunk view popularity: measurement from emitted frames, the
// carry-over predictor, GNN-backed prediction and the precision score.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "varfvv/error.hpp"
#include "varfvv/stgnn.hpp"
#include "varfvv/stream_model.hpp"

namespace varfvv {

using Vector = Eigen::VectorXd;

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Actual popularity of one chunk: x over C representations, x_hat over S.
struct ChunkPopularity {
  std::int64_t chunk = 0;
  Vector x, x_hat;
  std::int64_t frames = 0;
  bool empty = false;  // nothing was emitted in the chunk; x and x_hat are zero
};

/// Frame counts per (view, representation) for one chunk.
class PopularityCounter {
 public:
  PopularityCounter(int n_views, std::int64_t chunk)
      : chunk_(chunk), constant_(Vector::Zero(n_views)), switching_(Vector::Zero(n_views)) {
    require(n_views >= 1, ErrorCode::Config, "n_views must be >= 1");
  }

  void add(const Frame& f) {
    if (f.chunk != chunk_) return;
    require(f.view >= 1 && f.view <= constant_.size(), ErrorCode::InvalidView, "frame view out of range");
    auto& v = f.rep == Representation::Constant ? constant_ : switching_;
    v(f.view - 1) += 1.0;
    ++frames_;
  }

  ChunkPopularity result() const {
    ChunkPopularity out{chunk_, constant_, switching_, frames_, frames_ == 0};
    if (frames_ > 0) {
      out.x /= static_cast<double>(frames_);
      out.x_hat /= static_cast<double>(frames_);
    }
    return out;
  }

 private:
  std::int64_t chunk_;
  Vector constant_, switching_;
  std::int64_t frames_ = 0;
};

inline ChunkPopularity compute_actual_popularity(std::span<const std::vector<Frame>> logs, int n_views,
                                                 std::int64_t chunk) {
  PopularityCounter counter(n_views, chunk);
  for (const auto& log : logs)
    for (const auto& f : log) counter.add(f);
  return counter.result();
}

struct PopularityPrediction {
  Vector p, p_hat;
  bool cold_start = false;
};

/// Previous-popularity carry-over. Without an observed chunk every constant
/// view gets 1/N and the switching representations get nothing.
inline PopularityPrediction ppc_predict(const std::optional<ChunkPopularity>& previous, int n_views) {
  if (!previous) return {Vector::Constant(n_views, 1.0 / n_views), Vector::Zero(n_views), true};
  require(previous->x.size() == n_views && previous->x_hat.size() == n_views, ErrorCode::Shape,
          "popularity length differs from n_views");
  return {previous->x, previous->x_hat, false};
}

/// Clamps negatives to zero, then rescales p and p_hat jointly to `total`.
/// An all-zero prediction becomes uniform over the constant views.
inline void normalize_prediction(PopularityPrediction& pred, double total = 1.0) {
  pred.p = pred.p.cwiseMax(0.0);
  pred.p_hat = pred.p_hat.cwiseMax(0.0);
  const double sum = pred.p.sum() + pred.p_hat.sum();
  if (!(sum > 0)) {
    pred.p.setConstant(total / static_cast<double>(pred.p.size()));
    pred.p_hat.setZero();
    return;
  }
  pred.p *= total / sum;
  pred.p_hat *= total / sum;
}

enum class PredictorKind {
  Ppc,       // carry-over for both representations
  Gnn,       // GNN for both representations
  Combined,  // carry-over for constant views, GNN for switching views
};

inline std::string to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::Ppc: return "ppc";
    case PredictorKind::Gnn: return "gnn";
    case PredictorKind::Combined: return "combined";
  }
  return "?";
}

/// Observed popularity history plus the models that forecast it.
struct PopularityHistory {
  std::vector<Vector> x, x_hat;  // one entry per observed chunk
};

/// Prediction for the chunk following `history`. GNN parts fall back to
/// carry-over until the corresponding model has been trained.
inline PopularityPrediction predict_popularity(const PopularityHistory& history, int n_views, PredictorKind kind,
                                               const StgnnTrainer* switching_model,
                                               const StgnnTrainer* constant_model = nullptr) {
  std::optional<ChunkPopularity> last;
  if (!history.x.empty()) last = ChunkPopularity{0, history.x.back(), history.x_hat.back(), 1, false};
  PopularityPrediction pred = ppc_predict(last, n_views);
  if (pred.cold_start) return pred;

  auto use = [](const StgnnTrainer* m) { return m != nullptr && m->trained(); };
  if (kind != PredictorKind::Ppc && use(switching_model)) pred.p_hat = switching_model->predict(history.x_hat).col(0);
  if (kind == PredictorKind::Gnn && use(constant_model)) pred.p = constant_model->predict(history.x).col(0);

  const double total = last->x.sum() + last->x_hat.sum();
  normalize_prediction(pred, total > 0 ? total : 1.0);
  return pred;
}

/// 1 - sqrt((|p - x|^2 + |p_hat - x_hat|^2) / 2N).
inline double precision(std::span<const double> p, std::span<const double> p_hat, std::span<const double> x,
                        std::span<const double> x_hat) {
  const std::size_t n = p.size();
  require(n >= 1 && p_hat.size() == n && x.size() == n && x_hat.size() == n, ErrorCode::Shape,
          "precision: vector lengths differ");
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ss += (p[i] - x[i]) * (p[i] - x[i]);
    ss += (p_hat[i] - x_hat[i]) * (p_hat[i] - x_hat[i]);
  }
  return 1.0 - std::sqrt(ss / (2.0 * static_cast<double>(n)));
}

inline double precision(const PopularityPrediction& pred, const ChunkPopularity& actual) {
  return precision(as_span(pred.p), as_span(pred.p_hat), as_span(actual.x), as_span(actual.x_hat));
}

inline void write_popularity_header(std::ostream& os) { os << "chunk,view,x,x_hat,p,p_hat,precision\n"; }

inline void write_popularity_rows(std::ostream& os, const ChunkPopularity& actual, const PopularityPrediction& pred,
                                  double prec) {
  for (Eigen::Index i = 0; i < actual.x.size(); ++i)
    os << actual.chunk << ',' << (i + 1) << ',' << actual.x(i) << ',' << actual.x_hat(i) << ',' << pred.p(i) << ','
       << pred.p_hat(i) << ',' << prec << '\n';
}

}  // namespace varfvv
