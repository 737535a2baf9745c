#pragma once

// Minimal reverse-mode differentiation over dense matrices. A Tape records
// every operation of one forward pass; `backward` walks it in reverse and
// accumulates gradients into the nodes that require them.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "varfvv/error.hpp"

namespace varfvv::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape() const noexcept { return tape_; }
  std::size_t index() const noexcept { return index_; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t)>;

  Var leaf(Matrix value) { return push(std::move(value), true, {}); }
  Var constant(Matrix value) { return push(std::move(value), false, {}); }

  Var push(Matrix value, bool requires_grad, Backprop backprop) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, std::move(backprop)});
    return Var(this, nodes_.size() - 1);
  }

  const Matrix& value(std::size_t i) const { return nodes_[i].value; }
  bool requires_grad(std::size_t i) const { return nodes_[i].requires_grad; }

  /// Gradient of the last backward() root with respect to node `i` (zeros if untouched).
  Matrix grad(std::size_t i) const {
    const Node& n = nodes_[i];
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }
  const Matrix& upstream(std::size_t i) const { return nodes_[i].grad; }

  void accumulate(std::size_t i, const Matrix& g) {
    Node& n = nodes_[i];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  /// Reverse sweep from a 1x1 root.
  void backward(Var root) {
    require(root.rows() == 1 && root.cols() == 1, ErrorCode::Shape, "backward root must be 1x1");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[root.index()].grad = Matrix::Ones(1, 1);
    for (std::size_t i = root.index() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backprop && n.grad.size() != 0) n.backprop(*this, i);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(index_); }

namespace detail {
inline bool any_grad(const Var& a) { return a.tape()->requires_grad(a.index()); }
inline bool any_grad(const Var& a, const Var& b) { return any_grad(a) || any_grad(b); }
inline void same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::Shape, std::string(op) + ": shape mismatch");
}
}  // namespace detail

inline Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), ErrorCode::Shape, "matmul: inner dimensions differ");
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape()->push(a.value() * b.value(), detail::any_grad(a, b), [ia, ib](Tape& t, std::size_t o) {
    const Matrix& g = t.upstream(o);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

inline Var add(Var a, Var b) {
  detail::same_shape(a, b, "add");
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape()->push(a.value() + b.value(), detail::any_grad(a, b), [ia, ib](Tape& t, std::size_t o) {
    t.accumulate(ia, t.upstream(o));
    t.accumulate(ib, t.upstream(o));
  });
}

/// a (r x c) + row vector b (1 x c) broadcast over rows.
inline Var add_row(Var a, Var b) {
  require(b.rows() == 1 && b.cols() == a.cols(), ErrorCode::Shape, "add_row: bias shape");
  const std::size_t ia = a.index(), ib = b.index();
  Matrix v = a.value();
  v.rowwise() += b.value().row(0);
  return a.tape()->push(std::move(v), detail::any_grad(a, b), [ia, ib](Tape& t, std::size_t o) {
    t.accumulate(ia, t.upstream(o));
    if (t.requires_grad(ib)) t.accumulate(ib, t.upstream(o).colwise().sum());
  });
}

inline Var transpose(Var a) {
  const std::size_t ia = a.index();
  return a.tape()->push(a.value().transpose(), detail::any_grad(a),
                        [ia](Tape& t, std::size_t o) { t.accumulate(ia, t.upstream(o).transpose()); });
}

inline Var hadamard(Var a, Var b) {
  detail::same_shape(a, b, "hadamard");
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape()->push(a.value().cwiseProduct(b.value()), detail::any_grad(a, b),
                        [ia, ib](Tape& t, std::size_t o) {
                          const Matrix& g = t.upstream(o);
                          if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                          if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                        });
}

/// s (1 x 1) times a.
inline Var scale(Var s, Var a) {
  require(s.rows() == 1 && s.cols() == 1, ErrorCode::Shape, "scale: factor must be 1x1");
  const std::size_t is = s.index(), ia = a.index();
  return a.tape()->push(s.value()(0, 0) * a.value(), detail::any_grad(s, a), [is, ia](Tape& t, std::size_t o) {
    const Matrix& g = t.upstream(o);
    if (t.requires_grad(is)) t.accumulate(is, Matrix::Constant(1, 1, g.cwiseProduct(t.value(ia)).sum()));
    if (t.requires_grad(ia)) t.accumulate(ia, t.value(is)(0, 0) * g);
  });
}

/// Single entry of a as a 1x1 node.
inline Var element(Var a, Eigen::Index r, Eigen::Index c) {
  const std::size_t ia = a.index();
  return a.tape()->push(Matrix::Constant(1, 1, a.value()(r, c)), detail::any_grad(a),
                        [ia, r, c](Tape& t, std::size_t o) {
                          Matrix g = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
                          g(r, c) = t.upstream(o)(0, 0);
                          t.accumulate(ia, g);
                        });
}

inline Var sigmoid(Var a) {
  const std::size_t ia = a.index();
  Matrix v = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return a.tape()->push(std::move(v), detail::any_grad(a), [ia](Tape& t, std::size_t o) {
    const Matrix& y = t.value(o);
    t.accumulate(ia, t.upstream(o).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

/// max(x, 0); the subgradient at 0 is 0.
inline Var relu(Var a) {
  const std::size_t ia = a.index();
  return a.tape()->push(a.value().cwiseMax(0.0), detail::any_grad(a), [ia](Tape& t, std::size_t o) {
    const Matrix& x = t.value(ia);
    t.accumulate(ia, t.upstream(o).cwiseProduct(x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; })));
  });
}

/// Row-wise softmax; each output row sums to one.
inline Var softmax_rows(Var a) {
  const std::size_t ia = a.index();
  Matrix v = a.value();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double m = v.row(r).maxCoeff();
    v.row(r) = (v.row(r).array() - m).exp().matrix();
    v.row(r) /= v.row(r).sum();
  }
  return a.tape()->push(std::move(v), detail::any_grad(a), [ia](Tape& t, std::size_t o) {
    const Matrix& y = t.value(o);
    const Matrix& g = t.upstream(o);
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      dx.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    t.accumulate(ia, dx);
  });
}

/// Same-padded 1-D convolution along the columns of every row:
/// out(i, c) = sum_k kernel(k) * x(i, c + k - K/2) + bias, zero outside.
inline Var conv_rows_same(Var x, Var kernel, Var bias) {
  require(kernel.rows() == 1 && kernel.cols() % 2 == 1, ErrorCode::Shape, "conv kernel must be 1 x odd");
  require(bias.rows() == 1 && bias.cols() == 1, ErrorCode::Shape, "conv bias must be 1x1");
  const std::size_t ix = x.index(), ik = kernel.index(), ib = bias.index();
  const Matrix& xv = x.value();
  const Matrix& kv = kernel.value();
  const Eigen::Index width = kv.cols(), half = width / 2, cols = xv.cols();
  Matrix v = Matrix::Constant(xv.rows(), cols, bias.value()(0, 0));
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index k = 0; k < width; ++k) {
      const Eigen::Index src = c + k - half;
      if (src >= 0 && src < cols) v.col(c) += kv(0, k) * xv.col(src);
    }
  const bool g = detail::any_grad(x) || detail::any_grad(kernel) || detail::any_grad(bias);
  return x.tape()->push(std::move(v), g, [ix, ik, ib, width, half, cols](Tape& t, std::size_t o) {
    const Matrix& up = t.upstream(o);
    const Matrix& xv = t.value(ix);
    const Matrix& kv = t.value(ik);
    if (t.requires_grad(ib)) t.accumulate(ib, Matrix::Constant(1, 1, up.sum()));
    Matrix gk = Matrix::Zero(1, width);
    Matrix gx = Matrix::Zero(xv.rows(), cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index k = 0; k < width; ++k) {
        const Eigen::Index src = c + k - half;
        if (src < 0 || src >= cols) continue;
        gk(0, k) += up.col(c).dot(xv.col(src));
        gx.col(src) += kv(0, k) * up.col(c);
      }
    if (t.requires_grad(ik)) t.accumulate(ik, gk);
    if (t.requires_grad(ix)) t.accumulate(ix, gx);
  });
}

/// mean |pred - target| over all entries, as a 1x1 node. Subgradient 0 at 0.
inline Var mean_abs_error(Var pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), ErrorCode::Shape,
          "mean_abs_error: shape mismatch");
  const std::size_t ip = pred.index();
  const Matrix diff = pred.value() - target;
  const double n = static_cast<double>(diff.size());
  Matrix sign = diff.unaryExpr([](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); });
  return pred.tape()->push(Matrix::Constant(1, 1, diff.cwiseAbs().sum() / n), detail::any_grad(pred),
                           [ip, sign = std::move(sign), n](Tape& t, std::size_t o) {
                             t.accumulate(ip, sign * (t.upstream(o)(0, 0) / n));
                           });
}

}  // namespace varfvv::ad
