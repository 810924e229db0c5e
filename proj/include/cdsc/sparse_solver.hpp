#pragma once

#include <cdsc/atom_weights.hpp>
#include <cdsc/common.hpp>
#include <cdsc/dictionary.hpp>

namespace cdsc {

/// Sparse code split into the global block a^G and the specific block a^S.
struct SparseCode {
  Vector global;
  Vector specific;

  Vector stacked() const;
  static SparseCode from_stacked(const Eigen::Ref<const Vector>& code, Index global_count);
};

/// Per-coefficient l1 penalties lambda_k > 0.
class PenaltyProfile {
 public:
  explicit PenaltyProfile(Vector lambdas);

  static PenaltyProfile uniform(Index count, double lambda);
  /// lambda_global over the first `global_count` entries, lambda_specific after.
  static PenaltyProfile composite(Index global_count, Index specific_count, double lambda_global,
                                  double lambda_specific);

  const Vector& lambdas() const { return lambdas_; }
  Index size() const { return lambdas_.size(); }

 private:
  Vector lambdas_;
};

struct FeatureSignOptions {
  /// Cap on feature-sign steps; 0 selects 10 * (number of atoms).
  Index max_steps = 0;
  /// Absolute tolerance on the subgradient optimality conditions, scaled by
  /// max(1, ||D^T x||_inf).
  double tolerance = 1e-8;
};

/// Raised when the step cap is hit. Carries the best iterate.
class FeatureSignError : public Error {
 public:
  FeatureSignError(const std::string& what, Vector best, double violation)
      : Error(what), best_(std::move(best)), violation_(violation) {}

  const Vector& best() const { return best_; }
  double violation() const { return violation_; }

 private:
  Vector best_;
  double violation_;
};

/// ||x - D a||^2 + sum_k lambda_k |a_k|  (no 1/2 on the quadratic).
double l1_objective(const Matrix& dictionary, const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& code, const Eigen::Ref<const Vector>& lambdas);

/// Largest violation of the subgradient optimality conditions:
/// |2 d_k^T (D a - x) + lambda_k sign(a_k)| for a_k != 0, and
/// max(0, |2 d_k^T (D a - x)| - lambda_k) for a_k == 0.
double optimality_violation(const Matrix& dictionary, const Eigen::Ref<const Vector>& x,
                            const Eigen::Ref<const Vector>& code, const Eigen::Ref<const Vector>& lambdas);

/// Feature-sign search for min_a ||x - D a||^2 + sum_k lambda_k |a_k|.
/// Zero columns are never activated.
Vector feature_sign(const Matrix& dictionary, const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& lambdas, const FeatureSignOptions& options = {});

inline Vector feature_sign(const Matrix& dictionary, const Eigen::Ref<const Vector>& x,
                           const PenaltyProfile& penalties, const FeatureSignOptions& options = {}) {
  return feature_sign(dictionary, x, penalties.lambdas(), options);
}

/// Codes x against the effective atoms d_k * w_k. The reconstruction is
/// sum_k d_k w_k a_k.
SparseCode code_with_weights(const CompositeDictionary& dictionary, const Eigen::Ref<const Vector>& x,
                             const WeightVector& weights, const PenaltyProfile& penalties,
                             const FeatureSignOptions& options = {});

}  // namespace cdsc
