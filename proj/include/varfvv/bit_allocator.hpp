#pragma once

// QoE model and popularity-adaptive bit allocation for one chunk.
//
// Rates are expressed in megabits per chunk (the unit in which the model
// parameters eta and eta_hat are calibrated). Index i runs over views 0..N-1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "varfvv/error.hpp"

namespace varfvv {

/// How the per-multiplier rate problem is solved.
///   AsPrinted: one sequential pass over views, each rate from its own
///              stationarity equation with view i-1 fixed (no forward terms).
///   Full:      exact maximizer of the Lagrangian over the rate box, i.e. the
///              stationarity conditions including the terms through which a
///              rate enters view i+1's inter-view penalty.
enum class Coupling { AsPrinted, Full };

struct QoeParams {
  double eta = 1.0;
  double eta_hat = 4.0;
  double mu1 = 1.0;
  double mu2 = 1.0 / 16.0;
  double mu3 = 1.0;
  double epsilon = 0.005;
  double lambda_min = 0.0;
  double lambda_max = 100.0;
  int max_iterations = 64;
  Coupling coupling = Coupling::Full;

  void validate() const {
    require(eta > 0 && eta_hat > 0, ErrorCode::Config, "eta and eta_hat must be > 0");
    require(mu1 >= 0 && mu2 >= 0 && mu3 >= 0, ErrorCode::Config, "mu weights must be >= 0");
    require(epsilon > 0 && epsilon < 1, ErrorCode::Config, "epsilon must lie in (0, 1)");
    require(lambda_min < lambda_max && lambda_min >= 0, ErrorCode::Config, "need 0 <= lambda_min < lambda_max");
    require(max_iterations >= 1, ErrorCode::Config, "max_iterations must be >= 1");
  }
};

struct RateBounds {
  double r_min = 0, r_max = 0;          // view-constant representation
  double r_hat_min = 0, r_hat_max = 0;  // view-switching representation

  void validate() const {
    require(r_min >= 0 && r_hat_min >= 0 && r_min <= r_max && r_hat_min <= r_hat_max, ErrorCode::Config,
            "invalid rate bounds");
  }

  /// [0.1, 4] x the fair share R_avg / 2N for both representations.
  static RateBounds proportional(double r_avg, int n_views) {
    const double fair = r_avg / (2.0 * n_views);
    return {0.1 * fair, 4.0 * fair, 0.1 * fair, 4.0 * fair};
  }
};

/// Per-chunk budget amortized over a sliding window of future chunks.
struct BudgetSchedule {
  double r_tar = 0;  // target rate for all representations, Mbit/s
  double t_d = 1.0;  // chunk duration, s
  int sw = 4;        // sliding window, chunks
  std::int64_t n_coded = 0;
  double r_coded = 0;  // megabits spent on coded chunks so far
  int n_views = 1;
  RateBounds bounds;

  double r_avg() const { return r_tar * t_d; }
};

struct TargetBits {
  double bits = 0;
  bool floored = false;  // budget raised to the sum of minimum rates
};

inline TargetBits target_bits(const BudgetSchedule& s) {
  require(s.sw >= 1, ErrorCode::Config, "sliding window must be >= 1");
  const double r_avg = s.r_avg();
  const double r = (r_avg * static_cast<double>(s.n_coded + s.sw) - s.r_coded) / s.sw;
  const double floor = s.n_views * (s.bounds.r_min + s.bounds.r_hat_min);
  if (r < floor) return {floor, true};
  return {r, false};
}

enum AllocationFlag : unsigned {
  kAllocationOk = 0,
  kInfeasible = 1u << 0,        // even all-minimum rates exceed the budget
  kBracketExhausted = 1u << 1,  // tolerance not met within the lambda bracket / iteration cap
  kBudgetFloored = 1u << 2,     // target_bits had to raise the budget
};

inline std::string flags_to_string(unsigned flags) {
  if (flags == kAllocationOk) return "ok";
  std::string s;
  auto add = [&](const char* name) { s += (s.empty() ? "" : "|") + std::string(name); };
  if (flags & kInfeasible) add("infeasible");
  if (flags & kBracketExhausted) add("bracket_exhausted");
  if (flags & kBudgetFloored) add("budget_floored");
  return s;
}

struct Allocation {
  std::int64_t chunk = 0;
  double budget = 0;             // R_j
  std::vector<double> constant;  // R_{i,j}
  std::vector<double> switching; // R^_{i,j}
  double lambda = 0;
  int iterations = 0;
  unsigned flags = kAllocationOk;

  double total() const {
    double t = 0;
    for (double r : constant) t += r;
    for (double r : switching) t += r;
    return t;
  }
  int n_views() const { return static_cast<int>(constant.size()); }
};

struct QoeBreakdown {
  double quality = 0;      // QoE_1
  double inter_view = 0;   // QoE_2 (mu3 inside)
  double temporal = 0;     // QoE_3
  double total = 0;        // QoE_1 - mu1 QoE_2 - mu2 QoE_3
};

/// QoE of one chunk. Without `previous` the temporal term is zero.
inline QoeBreakdown qoe_total(std::span<const double> r, std::span<const double> r_hat,
                              std::optional<std::span<const double>> previous, std::span<const double> p,
                              std::span<const double> p_hat, const QoeParams& params) {
  const std::size_t n = r.size();
  require(r_hat.size() == n && p.size() == n && p_hat.size() == n && (!previous || previous->size() == n),
          ErrorCode::Shape, "qoe_total: vector lengths differ");
  for (std::size_t i = 0; i < n; ++i) {
    require(r[i] >= 0 && r_hat[i] >= 0 && (!previous || (*previous)[i] >= 0), ErrorCode::Domain,
            "negative rate");
    require(p[i] >= 0 && p_hat[i] >= 0, ErrorCode::Domain, "negative popularity");
  }
  QoeBreakdown q;
  for (std::size_t i = 0; i < n; ++i)
    q.quality += p[i] * std::log1p(r[i] / params.eta) + p_hat[i] * std::log1p(r_hat[i] / params.eta_hat);
  double hat_jumps = 0, cross = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d1 = r_hat[i] - r_hat[i - 1];
    const double d2 = r_hat[i] / params.eta_hat - r[i - 1] / params.eta;
    hat_jumps += p_hat[i] * d1 * d1;
    cross += p_hat[i] * d2 * d2;
  }
  q.inter_view = params.mu3 * hat_jumps + cross;
  if (previous)
    for (std::size_t i = 0; i < n; ++i) {
      const double d = r[i] - (*previous)[i];
      q.temporal += p[i] * d * d;
    }
  q.total = q.quality - params.mu1 * q.inter_view - params.mu2 * q.temporal;
  return q;
}

inline QoeBreakdown qoe_total(const Allocation& a, const Allocation* previous, std::span<const double> p,
                              std::span<const double> p_hat, const QoeParams& params) {
  std::optional<std::span<const double>> prev;
  if (previous) prev = std::span<const double>(previous->constant);
  return qoe_total(a.constant, a.switching, prev, p, p_hat, params);
}

namespace alloc_detail {

/// Root of a strictly decreasing f on [lo, hi] by bisection, clamped to the
/// interval when f does not change sign.
template <class F>
double decreasing_root(F&& f, double lo, double hi, double tol = 1e-9) {
  if (f(lo) <= 0) return lo;
  if (f(hi) >= 0) return hi;
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace alloc_detail

/// dL/dR_i: p/eta/(1 + R/eta) - 2 mu2 p (R - R_prev) - lambda.
inline double constant_stationarity(double rate, double p, double r_prev, double lambda, const QoeParams& q) {
  return p / q.eta / (1.0 + rate / q.eta) - 2.0 * q.mu2 * p * (rate - r_prev) - lambda;
}

/// dL/dR^_i with the (i-1) neighbours fixed. For the first view pass no
/// neighbours: the coupling terms vanish.
inline double switching_stationarity(double rate, double p_hat, std::optional<double> r_hat_prev_view,
                                     std::optional<double> r_prev_view, double lambda, const QoeParams& q) {
  double f = p_hat / q.eta_hat / (1.0 + rate / q.eta_hat) - lambda;
  if (r_hat_prev_view) f -= 2.0 * q.mu1 * q.mu3 * p_hat * (rate - *r_hat_prev_view);
  if (r_prev_view) f -= 2.0 * q.mu1 * p_hat * (rate / q.eta_hat - *r_prev_view / q.eta) / q.eta_hat;
  return f;
}

inline double solve_constant_rate(double p, double r_prev, double lambda, const QoeParams& q,
                                  const RateBounds& b) {
  if (p <= 0) return b.r_min;
  return alloc_detail::decreasing_root([&](double r) { return constant_stationarity(r, p, r_prev, lambda, q); },
                                       b.r_min, b.r_max);
}

inline double solve_switching_rate(double p_hat, std::optional<double> r_hat_prev_view,
                                   std::optional<double> r_prev_view, double lambda, const QoeParams& q,
                                   const RateBounds& b) {
  if (p_hat <= 0) return b.r_hat_min;
  return alloc_detail::decreasing_root(
      [&](double r) { return switching_stationarity(r, p_hat, r_hat_prev_view, r_prev_view, lambda, q); },
      b.r_hat_min, b.r_hat_max);
}

/// All rates at one multiplier: views in order, each view's constant rate
/// then its switching rate using the freshly solved view i-1.
inline void solve_rates_as_printed(double lambda, std::span<const double> p, std::span<const double> p_hat,
                                   std::span<const double> r_prev, const QoeParams& q, const RateBounds& b,
                                   std::vector<double>& r, std::vector<double>& r_hat) {
  const std::size_t n = p.size();
  r.assign(n, 0.0);
  r_hat.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = solve_constant_rate(p[i], r_prev[i], lambda, q, b);
    if (i == 0)
      r_hat[i] = solve_switching_rate(p_hat[i], std::nullopt, std::nullopt, lambda, q, b);
    else
      r_hat[i] = solve_switching_rate(p_hat[i], r_hat[i - 1], r[i - 1], lambda, q, b);
  }
}

/// Gradient of QoE with respect to (R_1, R^_1, ..., R_N, R^_N), all coupling
/// terms included.
inline Eigen::VectorXd qoe_gradient(std::span<const double> r, std::span<const double> r_hat,
                                    std::span<const double> r_prev, std::span<const double> p,
                                    std::span<const double> p_hat, const QoeParams& q) {
  const std::size_t n = r.size();
  Eigen::VectorXd g(static_cast<Eigen::Index>(2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    double gr = p[i] / (q.eta + r[i]) - 2.0 * q.mu2 * p[i] * (r[i] - r_prev[i]);
    double gh = p_hat[i] / (q.eta_hat + r_hat[i]);
    if (i > 0) {
      gh -= 2.0 * q.mu1 * q.mu3 * p_hat[i] * (r_hat[i] - r_hat[i - 1]);
      gh -= 2.0 * q.mu1 * p_hat[i] * (r_hat[i] / q.eta_hat - r[i - 1] / q.eta) / q.eta_hat;
    }
    if (i + 1 < n) {
      gr += 2.0 * q.mu1 * p_hat[i + 1] * (r_hat[i + 1] / q.eta_hat - r[i] / q.eta) / q.eta;
      gh += 2.0 * q.mu1 * q.mu3 * p_hat[i + 1] * (r_hat[i + 1] - r_hat[i]);
    }
    g(static_cast<Eigen::Index>(2 * i)) = gr;
    g(static_cast<Eigen::Index>(2 * i + 1)) = gh;
  }
  return g;
}

namespace alloc_detail {

/// Hessian of -QoE in the interleaved ordering (positive semidefinite).
inline Eigen::MatrixXd neg_qoe_hessian(std::span<const double> r, std::span<const double> r_hat,
                                       std::span<const double> p, std::span<const double> p_hat,
                                       const QoeParams& q) {
  const auto n = static_cast<Eigen::Index>(r.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Eigen::Index ri = 2 * i, hi = 2 * i + 1;
    h(ri, ri) += p[k] / ((q.eta + r[k]) * (q.eta + r[k])) + 2.0 * q.mu2 * p[k];
    h(hi, hi) += p_hat[k] / ((q.eta_hat + r_hat[k]) * (q.eta_hat + r_hat[k]));
    if (i > 0) {
      const Eigen::Index rp = 2 * (i - 1), hp = 2 * (i - 1) + 1;
      const double a = 2.0 * q.mu1 * q.mu3 * p_hat[k];
      h(hi, hi) += a;
      h(hp, hp) += a;
      h(hi, hp) -= a;
      h(hp, hi) -= a;
      const double c = 2.0 * q.mu1 * p_hat[k];
      h(hi, hi) += c / (q.eta_hat * q.eta_hat);
      h(rp, rp) += c / (q.eta * q.eta);
      h(hi, rp) -= c / (q.eta_hat * q.eta);
      h(rp, hi) -= c / (q.eta_hat * q.eta);
    }
  }
  return h;
}

}  // namespace alloc_detail

/// Maximizer of QoE - lambda * sum(rates) over the rate box by projected
/// Newton with Armijo backtracking. `r` and `r_hat` carry the warm start in
/// and the solution out.
inline void solve_rates_full(double lambda, std::span<const double> p, std::span<const double> p_hat,
                             std::span<const double> r_prev, const QoeParams& q, const RateBounds& b,
                             std::vector<double>& r, std::vector<double>& r_hat) {
  const std::size_t n = p.size();
  if (r.size() != n || r_hat.size() != n) solve_rates_as_printed(lambda, p, p_hat, r_prev, q, b, r, r_hat);
  const auto m = static_cast<Eigen::Index>(2 * n);
  Eigen::VectorXd lo(m), hi(m), x(m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(2 * i);
    lo(k) = b.r_min;
    hi(k) = b.r_max;
    lo(k + 1) = b.r_hat_min;
    hi(k + 1) = b.r_hat_max;
    x(k) = std::clamp(r[i], b.r_min, b.r_max);
    x(k + 1) = std::clamp(r_hat[i], b.r_hat_min, b.r_hat_max);
  }
  auto unpack = [&](const Eigen::VectorXd& v) {
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = v(static_cast<Eigen::Index>(2 * i));
      r_hat[i] = v(static_cast<Eigen::Index>(2 * i + 1));
    }
  };
  auto objective = [&](const Eigen::VectorXd& v) {  // -(QoE - lambda * sum)
    unpack(v);
    return -qoe_total(r, r_hat, std::span<const double>(r_prev), p, p_hat, q).total + lambda * v.sum();
  };

  const double scale = std::max(1.0, hi.maxCoeff());
  double fx = objective(x);
  for (int it = 0; it < 200; ++it) {
    unpack(x);
    Eigen::VectorXd grad = -qoe_gradient(r, r_hat, r_prev, p, p_hat, q);
    grad.array() += lambda;
    std::vector<Eigen::Index> free_idx;
    double pg = 0;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double tol = 1e-12 * scale;
      const bool pinned = (x(k) <= lo(k) + tol && grad(k) > 0) || (x(k) >= hi(k) - tol && grad(k) < 0);
      if (!pinned) {
        free_idx.push_back(k);
        pg = std::max(pg, std::abs(grad(k)));
      }
    }
    if (free_idx.empty() || pg < 1e-13) break;

    const Eigen::MatrixXd full_h = alloc_detail::neg_qoe_hessian(r, r_hat, p, p_hat, q);
    const auto f = static_cast<Eigen::Index>(free_idx.size());
    Eigen::MatrixXd hf(f, f);
    Eigen::VectorXd gf(f);
    for (Eigen::Index a = 0; a < f; ++a) {
      gf(a) = grad(free_idx[static_cast<std::size_t>(a)]);
      for (Eigen::Index c = 0; c < f; ++c)
        hf(a, c) = full_h(free_idx[static_cast<std::size_t>(a)], free_idx[static_cast<std::size_t>(c)]);
    }
    // Linear directions (zero popularity) have no curvature.
    const double ridge = 1e-12 * std::max(1.0, hf.diagonal().maxCoeff());
    hf.diagonal().array() += ridge;
    Eigen::VectorXd df = hf.ldlt().solve(-gf);
    if (!df.allFinite() || df.dot(gf) >= 0) df = -gf;

    Eigen::VectorXd dir = Eigen::VectorXd::Zero(m);
    for (Eigen::Index a = 0; a < f; ++a) dir(free_idx[static_cast<std::size_t>(a)]) = df(a);

    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd cand = (x + alpha * dir).cwiseMax(lo).cwiseMin(hi);
      const double fc = objective(cand);
      if (fc <= fx + 1e-4 * grad.dot(cand - x)) {
        moved = (cand - x).cwiseAbs().maxCoeff() > 0;
        x = std::move(cand);
        fx = fc;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
  }
  unpack(x);
}

inline void solve_rates(double lambda, std::span<const double> p, std::span<const double> p_hat,
                        std::span<const double> r_prev, const QoeParams& q, const RateBounds& b,
                        std::vector<double>& r, std::vector<double>& r_hat) {
  if (q.coupling == Coupling::AsPrinted)
    solve_rates_as_printed(lambda, p, p_hat, r_prev, q, b, r, r_hat);
  else
    solve_rates_full(lambda, p, p_hat, r_prev, q, b, r, r_hat);
}

/// Outer bisection on the Lagrange multiplier until the allocation spends the
/// budget within epsilon (or the iteration cap is hit).
inline Allocation allocate(std::span<const double> p, std::span<const double> p_hat, std::span<const double> r_prev,
                           double budget, const QoeParams& q, const RateBounds& b, std::int64_t chunk = 0) {
  q.validate();
  b.validate();
  const std::size_t n = p.size();
  require(n >= 1 && p_hat.size() == n && r_prev.size() == n, ErrorCode::Shape, "allocate: vector lengths differ");
  for (std::size_t i = 0; i < n; ++i)
    require(p[i] >= 0 && p_hat[i] >= 0, ErrorCode::Domain, "popularity must be non-negative");
  require(budget > 0, ErrorCode::Domain, "budget must be positive");

  Allocation a;
  a.chunk = chunk;
  a.budget = budget;
  const double minimum = static_cast<double>(n) * (b.r_min + b.r_hat_min);
  if (minimum > budget) {
    a.constant.assign(n, b.r_min);
    a.switching.assign(n, b.r_hat_min);
    a.lambda = q.lambda_max;
    a.flags = kInfeasible;
    return a;
  }

  double lo = q.lambda_min, hi = q.lambda_max;
  bool met = false;
  for (int it = 1; it <= q.max_iterations; ++it) {
    const double lambda = 0.5 * (lo + hi);
    solve_rates(lambda, p, p_hat, r_prev, q, b, a.constant, a.switching);
    a.lambda = lambda;
    a.iterations = it;
    const double spent = a.total();
    if (spent > budget)
      lo = lambda;
    else
      hi = lambda;
    if (std::abs(budget - spent) < q.epsilon * budget) {
      met = true;
      break;
    }
  }
  if (!met) a.flags |= kBracketExhausted;
  return a;
}

/// Equal split of the budget over all 2N representations; representations
/// pinned at a bound hand their share to the others.
inline Allocation uniform_allocate(double budget, int n_views, const RateBounds& b, std::int64_t chunk = 0) {
  b.validate();
  require(n_views >= 1, ErrorCode::Config, "n_views must be >= 1");
  Allocation a;
  a.chunk = chunk;
  a.budget = budget;
  const double n = n_views;
  auto spend = [&](double level) {
    return n * (std::clamp(level, b.r_min, b.r_max) + std::clamp(level, b.r_hat_min, b.r_hat_max));
  };
  double level;
  if (spend(0) >= budget) {
    level = 0;
    if (spend(0) > budget) a.flags |= kInfeasible;
  } else if (spend(std::max(b.r_max, b.r_hat_max)) <= budget) {
    level = std::max(b.r_max, b.r_hat_max);
    if (spend(level) < budget * (1 - 1e-12)) a.flags |= kBracketExhausted;
  } else {
    double lo = 0, hi = std::max(b.r_max, b.r_hat_max);
    level = budget / (2.0 * n);
    if (!(level >= b.r_min && level <= b.r_max && level >= b.r_hat_min && level <= b.r_hat_max)) {
      for (int it = 0; it < 200; ++it) {
        level = 0.5 * (lo + hi);
        if (spend(level) > budget)
          hi = level;
        else
          lo = level;
      }
    }
  }
  a.constant.assign(static_cast<std::size_t>(n_views), std::clamp(level, b.r_min, b.r_max));
  a.switching.assign(static_cast<std::size_t>(n_views), std::clamp(level, b.r_hat_min, b.r_hat_max));
  return a;
}

inline void write_allocation_header(std::ostream& os) { os << "chunk,lambda,view,R,R_hat,flags\n"; }

inline void write_allocation_rows(std::ostream& os, const Allocation& a) {
  for (int i = 0; i < a.n_views(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    os << a.chunk << ',' << a.lambda << ',' << (i + 1) << ',' << a.constant[k] << ',' << a.switching[k] << ','
       << flags_to_string(a.flags) << '\n';
  }
}

}  // namespace varfvv
