#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "varfvv/error.hpp"

namespace varfvv {

/// Camera adjacency graph with its scaled normalized Laplacian
/// L~ = 2 L / lambda_max(L) - I, L = I - D^-1/2 A D^-1/2.
class ViewGraph {
 public:
  explicit ViewGraph(Eigen::MatrixXd adjacency) : adjacency_(std::move(adjacency)) {
    require(adjacency_.rows() == adjacency_.cols() && adjacency_.rows() >= 1, ErrorCode::Shape,
            "adjacency must be square and non-empty");
    require(adjacency_.isApprox(adjacency_.transpose()), ErrorCode::Validation, "adjacency must be symmetric");
    require(adjacency_.diagonal().isZero(), ErrorCode::Validation, "adjacency must have a zero diagonal");
    build_laplacian();
  }

  /// Linear camera rig: view i adjacent to i-1 and i+1.
  static ViewGraph path(int n_views) {
    require(n_views >= 1, ErrorCode::Config, "graph needs at least one vertex");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_views, n_views);
    for (int i = 0; i + 1 < n_views; ++i) a(i, i + 1) = a(i + 1, i) = 1.0;
    return ViewGraph(std::move(a));
  }

  /// Undirected edge list, one "i,j" pair (1-based views) per line. Lines
  /// starting with '#' and a non-numeric first line (header) are ignored.
  static ViewGraph load_edges(const std::string& path, int n_views) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open adjacency file " + path);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_views, n_views);
    std::string line;
    int line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::istringstream row(line);
      int i = 0, j = 0;
      char comma = 0;
      const bool parsed = (row >> i >> comma >> j) && comma == ',' && (row >> std::ws).eof();
      const bool header = first && !std::isdigit(static_cast<unsigned char>(line[0]));
      first = false;
      if (!parsed) {
        if (header) continue;
        fail(ErrorCode::Parse, path + ":" + std::to_string(line_no) + ": expected \"i,j\"");
      }
      require(i >= 1 && i <= n_views && j >= 1 && j <= n_views && i != j, ErrorCode::Validation,
              path + ":" + std::to_string(line_no) + ": edge endpoints out of range");
      a(i - 1, j - 1) = a(j - 1, i - 1) = 1.0;
    }
    return ViewGraph(std::move(a));
  }

  int size() const noexcept { return static_cast<int>(adjacency_.rows()); }
  const Eigen::MatrixXd& adjacency() const noexcept { return adjacency_; }
  const Eigen::MatrixXd& laplacian() const noexcept { return laplacian_; }
  const Eigen::MatrixXd& scaled_laplacian() const noexcept { return scaled_; }
  double lambda_max() const noexcept { return lambda_max_; }

  /// T_1(L~) .. T_order(L~) via T_0 = I, T_1 = L~, T_m = 2 L~ T_{m-1} - T_{m-2}.
  std::vector<Eigen::MatrixXd> chebyshev_terms(int order) const {
    require(order >= 1, ErrorCode::Config, "Chebyshev order must be >= 1");
    const auto n = adjacency_.rows();
    std::vector<Eigen::MatrixXd> terms;
    Eigen::MatrixXd prev = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd cur = scaled_;
    terms.push_back(cur);
    for (int m = 2; m <= order; ++m) {
      Eigen::MatrixXd next = 2.0 * scaled_ * cur - prev;
      prev = std::move(cur);
      cur = std::move(next);
      terms.push_back(cur);
    }
    return terms;
  }

  /// Largest eigenvalue of a symmetric PSD matrix by power iteration; stops
  /// when the eigen-residual |M v - rho v| drops below `tol`.
  static double power_iteration(const Eigen::MatrixXd& m, double tol = 1e-6, int max_iter = 1000000) {
    const auto n = m.rows();
    Eigen::VectorXd v(n);
    // Deterministic start with components along every eigenvector in practice.
    for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i) + 0.3);
    v.normalize();
    double rho = 0;
    for (int it = 0; it < max_iter; ++it) {
      Eigen::VectorXd w = m * v;
      rho = v.dot(w);
      if ((w - rho * v).norm() < tol) return rho;
      const double norm = w.norm();
      if (norm == 0) return 0;
      v = w / norm;
    }
    return rho;
  }

 private:
  void build_laplacian() {
    const auto n = adjacency_.rows();
    Eigen::VectorXd inv_sqrt_deg(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = adjacency_.row(i).sum();
      inv_sqrt_deg(i) = d > 0 ? 1.0 / std::sqrt(d) : 0.0;
    }
    laplacian_ = -(inv_sqrt_deg.asDiagonal() * adjacency_ * inv_sqrt_deg.asDiagonal());
    for (Eigen::Index i = 0; i < n; ++i) laplacian_(i, i) = inv_sqrt_deg(i) > 0 ? 1.0 : 0.0;
    lambda_max_ = power_iteration(laplacian_);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    // Edgeless graph: L = 0, spectrum collapses to -1.
    scaled_ = lambda_max_ > 0 ? Eigen::MatrixXd(2.0 / lambda_max_ * laplacian_ - id) : Eigen::MatrixXd(-id);
  }

  Eigen::MatrixXd adjacency_;
  Eigen::MatrixXd laplacian_;
  Eigen::MatrixXd scaled_;
  double lambda_max_ = 0;
};

}  // namespace varfvv
