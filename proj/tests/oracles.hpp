#pragma once

// Independent reference implementations used only by the tests.

#include <cdsc/atom_weights.hpp>
#include <cdsc/common.hpp>
#include <cdsc/dictionary.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using cdsc::Index;
using cdsc::Matrix;
using cdsc::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Index size, double scale = 1.0) {
  return random_matrix(rng, size, 1, scale).col(0);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Matrix unit_columns(Matrix m) {
  for (Index j = 0; j < m.cols(); ++j) m.col(j).normalize();
  return m;
}

/// Minimum of ||x - D a||^2 + sum_k lambda_k |a_k| by enumeration: every
/// support of size <= rank(D) with linearly independent columns and every
/// sign pattern on it. The stationary point of each sign orthant is kept when
/// its signs agree with the pattern.
inline double lasso_brute_force(const Matrix& d, const Vector& x, const Vector& lambdas, Vector* argmin = nullptr) {
  const Index k = d.cols();
  const Matrix g = d.transpose() * d;
  const Vector b = d.transpose() * x;
  const double xx = x.squaredNorm();
  const Index max_support = std::min<Index>(k, d.rows());

  double best = xx;
  Vector best_a = Vector::Zero(k);
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    std::vector<Index> s;
    for (Index j = 0; j < k; ++j)
      if (mask & (1u << j)) s.push_back(j);
    const Index n = static_cast<Index>(s.size());
    if (n > max_support) continue;
    Matrix gs(n, n);
    Vector bs(n), ls(n);
    for (Index i = 0; i < n; ++i) {
      bs(i) = b(s[i]);
      ls(i) = lambdas(s[i]);
      for (Index j = 0; j < n; ++j) gs(i, j) = g(s[i], s[j]);
    }
    Eigen::FullPivLU<Matrix> lu(gs);
    if (lu.rank() < n) continue;
    const Vector u = lu.solve(bs);
    const Matrix v = lu.solve(Matrix(ls.asDiagonal())) * 0.5;
    for (unsigned signs = 0; signs < (1u << n); ++signs) {
      Vector theta(n);
      for (Index i = 0; i < n; ++i) theta(i) = (signs & (1u << i)) ? -1.0 : 1.0;
      const Vector a = u - v * theta;
      bool consistent = true;
      for (Index i = 0; i < n; ++i)
        if (a(i) * theta(i) <= 0.0) consistent = false;
      if (!consistent) continue;
      const double obj = xx - 2.0 * a.dot(bs) + a.dot(gs * a) + ls.dot(a.cwiseAbs());
      if (obj < best) {
        best = obj;
        best_a.setZero();
        for (Index i = 0; i < n; ++i) best_a(s[i]) = a(i);
      }
    }
  }
  if (argmin) *argmin = best_a;
  return best;
}

/// Residual term ||x - sum_k d_k w_k a_k||^2 with Mahalanobis weights evaluated
/// as explicit quadratic forms (d - x)^T F^T F (d - x).
inline double weighted_residual(const Matrix& global, const Matrix& specific, const Vector& x, const Vector& code,
                                const Matrix& fg, const Matrix& fs) {
  const Matrix og = fg.transpose() * fg;
  const Matrix os = fs.transpose() * fs;
  Vector r = x;
  for (Index k = 0; k < global.cols(); ++k) {
    const Vector dx = global.col(k) - x;
    r -= global.col(k) * std::exp(-dx.dot(og * dx)) * code(k);
  }
  for (Index k = 0; k < specific.cols(); ++k) {
    const Vector dx = specific.col(k) - x;
    r -= specific.col(k) * std::exp(-dx.dot(os * dx)) * code(global.cols() + k);
  }
  return r.squaredNorm();
}

/// Central finite differences of weighted_residual with respect to one factor.
inline Matrix residual_gradient_fd(const Matrix& global, const Matrix& specific, const Vector& x, const Vector& code,
                                   const Matrix& fg, const Matrix& fs, bool wrt_global, double h = 1e-5) {
  const Matrix& f = wrt_global ? fg : fs;
  Matrix grad(f.rows(), f.cols());
  for (Index i = 0; i < f.rows(); ++i) {
    for (Index j = 0; j < f.cols(); ++j) {
      Matrix plus = f, minus = f;
      plus(i, j) += h;
      minus(i, j) -= h;
      const double jp = wrt_global ? weighted_residual(global, specific, x, code, plus, fs)
                                   : weighted_residual(global, specific, x, code, fg, plus);
      const double jm = wrt_global ? weighted_residual(global, specific, x, code, minus, fs)
                                   : weighted_residual(global, specific, x, code, fg, minus);
      grad(i, j) = (jp - jm) / (2.0 * h);
    }
  }
  return grad;
}

/// Greedy one-to-one matching of recovered atoms to planted ones by
/// |correlation|, largest first. Returns the matched |correlation| per planted atom.
inline std::vector<double> greedy_atom_matching(const Matrix& planted, const Matrix& recovered) {
  const Matrix c = (unit_columns(planted).transpose() * unit_columns(recovered)).cwiseAbs();
  std::vector<double> best(static_cast<std::size_t>(planted.cols()), 0.0);
  std::vector<char> used_p(static_cast<std::size_t>(planted.cols()), 0), used_r(static_cast<std::size_t>(recovered.cols()), 0);
  const Index rounds = std::min(planted.cols(), recovered.cols());
  for (Index round = 0; round < rounds; ++round) {
    double top = -1.0;
    Index bi = -1, bj = -1;
    for (Index i = 0; i < c.rows(); ++i) {
      if (used_p[static_cast<std::size_t>(i)]) continue;
      for (Index j = 0; j < c.cols(); ++j) {
        if (used_r[static_cast<std::size_t>(j)]) continue;
        if (c(i, j) > top) {
          top = c(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    used_p[static_cast<std::size_t>(bi)] = used_r[static_cast<std::size_t>(bj)] = 1;
    best[static_cast<std::size_t>(bi)] = top;
  }
  return best;
}

/// Exhaustive argmin of the squared patch distance over every LR anchor,
/// restricted to [r0, r1] x [c0, c1]; ties go to the first in scan order.
inline std::pair<Index, Index> exhaustive_match(const Matrix& lr, const Vector& target, Index side, Index r0, Index r1,
                                                Index c0, Index c1) {
  double best = std::numeric_limits<double>::infinity();
  std::pair<Index, Index> at{-1, -1};
  for (Index m = r0; m <= r1; ++m) {
    for (Index n = c0; n <= c1; ++n) {
      double dist = 0.0;
      for (Index r = 0; r < side; ++r)
        for (Index c = 0; c < side; ++c) {
          const double diff = lr(m + r, n + c) - target(r * side + c);
          dist += diff * diff;
        }
      if (dist < best) {
        best = dist;
        at = {m, n};
      }
    }
  }
  return at;
}

}  // namespace oracle
