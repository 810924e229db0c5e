#include <cdsc/atom_weights.hpp>

#include <cmath>

namespace cdsc {

double guarded_exp_neg(double q) {
  const double w = std::exp(-std::min(q, kMaxExponent));
  return w < kMinWeight ? 0.0 : w;
}

void FixedRbfParams::validate() const {
  if (!(omega_global > 0.0)) throw InvalidArgument("omega_global must be positive");
  if (!(omega_specific > omega_global))
    throw InvalidArgument("omega_specific must exceed omega_global (internal weights decay faster)");
}

MahalanobisParams MahalanobisParams::from_rbf(const FixedRbfParams& rbf, Index dim) {
  return {std::sqrt(rbf.omega_global) * Matrix::Identity(dim, dim),
          std::sqrt(rbf.omega_specific) * Matrix::Identity(dim, dim)};
}

Vector WeightVector::stacked() const {
  Vector v(global.size() + specific.size());
  v << global, specific;
  return v;
}

double squared_distance(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  double q = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    const double diff = u(i) - v(i);
    q += diff * diff;
  }
  return q;
}

double rbf_weight(const Eigen::Ref<const Vector>& atom, const Eigen::Ref<const Vector>& x, double omega) {
  if (atom.size() != x.size()) throw DimensionError("atom and signal dimensions differ");
  const double s = std::sqrt(omega);
  double q = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double diff = s * atom(i) - s * x(i);
    q += diff * diff;
  }
  return guarded_exp_neg(q);
}

double mahalanobis_weight(const Eigen::Ref<const Vector>& atom, const Eigen::Ref<const Vector>& x,
                          const Matrix& f) {
  if (atom.size() != x.size()) throw DimensionError("atom and signal dimensions differ");
  if (f.cols() != x.size()) throw DimensionError("metric factor does not match signal dimension");
  const Vector fd = f * atom;
  const Vector fx = f * x;
  return guarded_exp_neg(squared_distance(fd, fx));
}

WeightVector rbf_weights(const CompositeDictionary& dictionary, const Eigen::Ref<const Vector>& x,
                         const FixedRbfParams& params) {
  WeightVector w;
  w.global.resize(dictionary.global_count());
  w.specific.resize(dictionary.specific_count());
  for (Index k = 0; k < w.global.size(); ++k)
    w.global(k) = rbf_weight(dictionary.global().atom(k), x, params.omega_global);
  for (Index k = 0; k < w.specific.size(); ++k)
    w.specific(k) = rbf_weight(dictionary.specific().atom(k), x, params.omega_specific);
  return w;
}

WeightVector mahalanobis_weights(const CompositeDictionary& dictionary, const Eigen::Ref<const Vector>& x,
                                 const MahalanobisParams& params) {
  WeightVector w;
  w.global.resize(dictionary.global_count());
  w.specific.resize(dictionary.specific_count());
  for (Index k = 0; k < w.global.size(); ++k)
    w.global(k) = mahalanobis_weight(dictionary.global().atom(k), x, params.f_global);
  for (Index k = 0; k < w.specific.size(); ++k)
    w.specific(k) = mahalanobis_weight(dictionary.specific().atom(k), x, params.f_specific);
  return w;
}

Matrix weight_gradient_F(const CompositeDictionary& dictionary, const Eigen::Ref<const Vector>& x,
                         const Eigen::Ref<const Vector>& code, const MahalanobisParams& params, Block which) {
  if (code.size() != dictionary.size()) throw DimensionError("code length does not match dictionary");
  const WeightVector w = mahalanobis_weights(dictionary, x, params);
  const Vector ws = w.stacked();
  const Matrix d = dictionary.stacked();

  Vector residual = x;
  for (Index k = 0; k < d.cols(); ++k)
    if (code(k) != 0.0) residual -= d.col(k) * (ws(k) * code(k));

  const Matrix& f = params.factor(which);
  const Index offset = which == Block::global ? 0 : dictionary.global_count();
  const Index count = which == Block::global ? dictionary.global_count() : dictionary.specific_count();

  // dJ/dF = sum_k (-2 r^T d_k a_k w_k) * (-2 F delta_k delta_k^T), delta_k = d_k - x.
  Matrix scatter = Matrix::Zero(x.size(), x.size());
  for (Index j = 0; j < count; ++j) {
    const Index k = offset + j;
    if (code(k) == 0.0 || ws(k) == 0.0) continue;
    if (squared_distance(f * d.col(k), f * x) >= kMaxExponent) continue;  // clamped: locally constant
    const Vector delta = d.col(k) - x;
    const double c = residual.dot(d.col(k)) * code(k) * ws(k);
    scatter.noalias() += (4.0 * c) * delta * delta.transpose();
  }
  return f * scatter;
}

}  // namespace cdsc
