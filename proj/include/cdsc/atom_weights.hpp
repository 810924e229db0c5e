#pragma once

#include <cdsc/common.hpp>
#include <cdsc/dictionary.hpp>

namespace cdsc {

/// Which block of a composite dictionary an operation refers to.
enum class Block { global, specific };

/// Quadratic forms are clamped here before exponentiation.
inline constexpr double kMaxExponent = 700.0;
/// Weights below this are flushed to zero (atom treated as inactive).
inline constexpr double kMinWeight = 1e-300;

/// exp(-q) with the clamp/flush guards applied.
double guarded_exp_neg(double q);

/// Fixed RBF weights exp(-omega ||d - x||^2), one constant per block.
struct FixedRbfParams {
  double omega_global = 0.0;
  double omega_specific = 0.0;

  /// Requires omega_specific > omega_global > 0.
  void validate() const;
};

/// Learned Mahalanobis weights exp(-(d - x)^T F^T F (d - x)), one factor per block.
struct MahalanobisParams {
  Matrix f_global;
  Matrix f_specific;

  Matrix omega_global() const { return f_global.transpose() * f_global; }
  Matrix omega_specific() const { return f_specific.transpose() * f_specific; }
  const Matrix& factor(Block which) const { return which == Block::global ? f_global : f_specific; }
  Matrix& factor(Block which) { return which == Block::global ? f_global : f_specific; }

  /// F = sqrt(omega) * I for both blocks: reproduces the RBF weights.
  static MahalanobisParams from_rbf(const FixedRbfParams& rbf, Index dim);
};

/// Per-atom weights in (0, 1] (or exactly 0 after flushing).
struct WeightVector {
  Vector global;
  Vector specific;

  Vector stacked() const;
};

/// sum_i (u_i - v_i)^2 accumulated in index order. Every weight is evaluated
/// through this (on scaled vectors), so equal metrics give equal bits.
double squared_distance(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v);

/// Evaluated as sum_i (s d_i - s x_i)^2 with s = sqrt(omega).
double rbf_weight(const Eigen::Ref<const Vector>& atom, const Eigen::Ref<const Vector>& x, double omega);

/// exp(-||F (atom - x)||^2).
double mahalanobis_weight(const Eigen::Ref<const Vector>& atom, const Eigen::Ref<const Vector>& x,
                          const Matrix& f);

WeightVector rbf_weights(const CompositeDictionary& dictionary, const Eigen::Ref<const Vector>& x,
                         const FixedRbfParams& params);
WeightVector mahalanobis_weights(const CompositeDictionary& dictionary, const Eigen::Ref<const Vector>& x,
                                 const MahalanobisParams& params);

/// Gradient with respect to the selected block's factor F of the residual
/// term ||x - sum_k d_k w_k a_k||^2, where the weights come from `params`
/// and `code` is the stacked (global then specific) coefficient vector.
Matrix weight_gradient_F(const CompositeDictionary& dictionary, const Eigen::Ref<const Vector>& x,
                         const Eigen::Ref<const Vector>& code, const MahalanobisParams& params, Block which);

}  // namespace cdsc
