#include <cdsc/sparse_solver.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace cdsc {

Vector SparseCode::stacked() const {
  Vector v(global.size() + specific.size());
  v << global, specific;
  return v;
}

SparseCode SparseCode::from_stacked(const Eigen::Ref<const Vector>& code, Index global_count) {
  if (global_count < 0 || global_count > code.size()) throw DimensionError("bad global block size");
  return {code.head(global_count), code.tail(code.size() - global_count)};
}

PenaltyProfile::PenaltyProfile(Vector lambdas) : lambdas_(std::move(lambdas)) {
  for (Index k = 0; k < lambdas_.size(); ++k)
    if (!(lambdas_(k) > 0.0) || !std::isfinite(lambdas_(k)))
      throw InvalidArgument("penalties must be positive and finite");
}

PenaltyProfile PenaltyProfile::uniform(Index count, double lambda) {
  return PenaltyProfile(Vector::Constant(count, lambda));
}

PenaltyProfile PenaltyProfile::composite(Index global_count, Index specific_count, double lambda_global,
                                         double lambda_specific) {
  Vector v(global_count + specific_count);
  v.head(global_count).setConstant(lambda_global);
  v.tail(specific_count).setConstant(lambda_specific);
  return PenaltyProfile(std::move(v));
}

double l1_objective(const Matrix& dictionary, const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& code, const Eigen::Ref<const Vector>& lambdas) {
  return (x - dictionary * code).squaredNorm() + lambdas.dot(code.cwiseAbs());
}

double optimality_violation(const Matrix& dictionary, const Eigen::Ref<const Vector>& x,
                            const Eigen::Ref<const Vector>& code, const Eigen::Ref<const Vector>& lambdas) {
  const Vector g = 2.0 * (dictionary.transpose() * (dictionary * code - x));
  double worst = 0.0;
  for (Index k = 0; k < g.size(); ++k) {
    const double v = code(k) != 0.0 ? std::abs(g(k) + lambdas(k) * (code(k) > 0 ? 1.0 : -1.0))
                                     : std::max(0.0, std::abs(g(k)) - lambdas(k));
    worst = std::max(worst, v);
  }
  return worst;
}

namespace {

// Active-set state for one feature-sign run.
struct ActiveSet {
  std::vector<Index> index;
  Vector value;  // coefficients, aligned with index
  Vector sign;   // theta, aligned with index
};

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Vector feature_sign(const Matrix& dictionary, const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& lambdas, const FeatureSignOptions& options) {
  const Index p = dictionary.rows();
  const Index k_atoms = dictionary.cols();
  if (x.size() != p) throw DimensionError("signal dimension does not match dictionary");
  if (lambdas.size() != k_atoms) throw DimensionError("penalty count does not match dictionary");
  for (Index k = 0; k < k_atoms; ++k)
    if (!(lambdas(k) > 0.0)) throw InvalidArgument("penalties must be strictly positive");

  const Vector dtx = dictionary.transpose() * x;
  const double xtx = x.squaredNorm();
  const double tol = options.tolerance * std::max(1.0, dtx.cwiseAbs().maxCoeff());
  const Index cap = options.max_steps > 0 ? options.max_steps : 10 * std::max<Index>(k_atoms, 1);
  const Vector col_norm = dictionary.colwise().squaredNorm().transpose();

  Vector a = Vector::Zero(k_atoms);
  std::vector<char> is_active(static_cast<std::size_t>(k_atoms), 0);
  ActiveSet act;

  auto gradient_all = [&]() -> Vector {
    Vector da = Vector::Zero(p);
    for (std::size_t i = 0; i < act.index.size(); ++i) da += dictionary.col(act.index[i]) * act.value(static_cast<Index>(i));
    return 2.0 * (dictionary.transpose() * da - dtx);
  };
  auto scatter = [&]() {
    a.setZero();
    for (std::size_t i = 0; i < act.index.size(); ++i) a(act.index[i]) = act.value(static_cast<Index>(i));
  };
  auto active_optimal = [&](const Vector& g) {
    for (std::size_t i = 0; i < act.index.size(); ++i) {
      const Index k = act.index[i];
      if (std::abs(g(k) + lambdas(k) * act.sign(static_cast<Index>(i))) > tol) return false;
    }
    return true;
  };

  Index steps = 0;
  for (;;) {
    // Activate the zero coefficient with the largest subgradient violation.
    Vector g = gradient_all();
    Index pick = -1;
    double pick_violation = tol;
    for (Index k = 0; k < k_atoms; ++k) {
      if (is_active[static_cast<std::size_t>(k)] || col_norm(k) == 0.0) continue;
      const double v = std::abs(g(k)) - lambdas(k);
      if (v > pick_violation) {
        pick_violation = v;
        pick = k;
      }
    }
    if (pick < 0 && active_optimal(g)) break;
    if (pick >= 0) {
      is_active[static_cast<std::size_t>(pick)] = 1;
      act.index.push_back(pick);
      const Index s = static_cast<Index>(act.index.size());
      act.value.conservativeResize(s);
      act.sign.conservativeResize(s);
      act.value(s - 1) = 0.0;
      act.sign(s - 1) = -sgn(g(pick));
    }

    // Feature-sign steps until the active coefficients are optimal.
    for (;;) {
      if (++steps > cap) {
        scatter();
        throw FeatureSignError("feature-sign did not converge within " + std::to_string(cap) + " steps", a,
                               optimality_violation(dictionary, x, a, lambdas));
      }
      const Index s = static_cast<Index>(act.index.size());
      if (s == 0) break;
      Matrix da(p, s);
      Vector dtx_a(s), lam(s);
      for (Index i = 0; i < s; ++i) {
        const Index k = act.index[static_cast<std::size_t>(i)];
        da.col(i) = dictionary.col(k);
        dtx_a(i) = dtx(k);
        lam(i) = lambdas(k);
      }
      const Matrix gram = da.transpose() * da;
      const Vector rhs = dtx_a - 0.5 * lam.cwiseProduct(act.sign);

      Vector target;
      Eigen::LLT<Matrix> llt(gram);
      if (llt.info() == Eigen::Success) target = llt.solve(rhs);
      if (target.size() != s || !target.allFinite() || (gram * target - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) {
        // Rank-deficient active set: a ridge-regularized solve points along the
        // null direction, and the sign-change line search below then drops a
        // coefficient without changing the residual.
        const double eps = 1e-10 * std::max(1.0, gram.diagonal().maxCoeff());
        target = (gram + eps * Matrix::Identity(s, s)).ldlt().solve(rhs);
      }

      auto restricted = [&](const Vector& v) {
        return xtx - 2.0 * v.dot(dtx_a) + v.dot(gram * v) + lam.dot(v.cwiseAbs());
      };

      // Candidate points: the target and every sign change along the segment.
      const Vector& cur = act.value;
      Vector best = target;
      double best_obj = restricted(target);
      Index best_zero = -1;
      for (Index i = 0; i < s; ++i) {
        if (cur(i) == 0.0 || sgn(cur(i)) == sgn(target(i))) continue;
        const double t = cur(i) / (cur(i) - target(i));
        if (!(t > 0.0 && t < 1.0)) continue;
        Vector v = cur + t * (target - cur);
        v(i) = 0.0;
        const double obj = restricted(v);
        if (obj < best_obj) {
          best_obj = obj;
          best = std::move(v);
          best_zero = i;
        }
      }
      if (best_zero < 0) {
        // Exact zeros from the target itself are treated as crossings too.
        for (Index i = 0; i < s; ++i)
          if (std::abs(best(i)) <= 1e-15 * (1.0 + std::abs(cur(i)))) best(i) = 0.0;
      }

      // Commit, dropping zeroed coefficients.
      ActiveSet next;
      for (Index i = 0; i < s; ++i) {
        const Index k = act.index[static_cast<std::size_t>(i)];
        if (best(i) == 0.0) {
          is_active[static_cast<std::size_t>(k)] = 0;
          continue;
        }
        next.index.push_back(k);
      }
      next.value.resize(static_cast<Index>(next.index.size()));
      next.sign.resize(next.value.size());
      for (Index i = 0, j = 0; i < s; ++i) {
        if (best(i) == 0.0) continue;
        next.value(j) = best(i);
        next.sign(j) = sgn(best(i));
        ++j;
      }
      act = std::move(next);

      g = gradient_all();
      if (active_optimal(g)) break;
    }
  }
  scatter();
  return a;
}

SparseCode code_with_weights(const CompositeDictionary& dictionary, const Eigen::Ref<const Vector>& x,
                             const WeightVector& weights, const PenaltyProfile& penalties,
                             const FeatureSignOptions& options) {
  if (weights.global.size() != dictionary.global_count() || weights.specific.size() != dictionary.specific_count())
    throw DimensionError("weights do not match the composite dictionary");
  if (penalties.size() != dictionary.size()) throw DimensionError("penalties do not match the composite dictionary");
  const Vector w = weights.stacked();
  const Matrix effective = dictionary.stacked() * w.asDiagonal();
  const Vector a = feature_sign(effective, x, penalties.lambdas(), options);
  return SparseCode::from_stacked(a, dictionary.global_count());
}

}  // namespace cdsc
