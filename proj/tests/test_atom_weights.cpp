#include "oracles.hpp"

#include <cdsc/atom_weights.hpp>

#include <doctest.h>

using namespace cdsc;

TEST_CASE("rbf_weight closed forms") {
  const Vector x = Vector::LinSpaced(4, 0.0, 1.0);
  CHECK(rbf_weight(x, x, 3.0) == 1.0);
  Vector d = x;
  d(0) += std::sqrt(std::log(2.0));
  CHECK(rbf_weight(d, x, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  const double w1 = rbf_weight(d, x, 0.7);
  CHECK(rbf_weight(d, x, 1.4) == doctest::Approx(w1 * w1).epsilon(1e-12));
}

TEST_CASE("rbf_weight decreases with distance and with omega") {
  std::mt19937_64 rng(1);
  const Vector x = oracle::random_vector(rng, 25, 0.2);
  const Vector dir = oracle::random_vector(rng, 25).normalized();
  double prev = 2.0;
  for (double t : {0.0, 0.1, 0.5, 1.0, 2.0}) {
    const double w = rbf_weight(x + t * dir, x, 0.5);
    CHECK(w < prev);
    CHECK(w > 0.0);
    CHECK(w <= 1.0);
    prev = w;
  }
  const Vector d = x + dir;
  CHECK(rbf_weight(d, x, 1.0) < rbf_weight(d, x, 0.5));
}

TEST_CASE("mahalanobis_weight: zero factor gives unit weights") {
  std::mt19937_64 rng(2);
  const Matrix f = Matrix::Zero(6, 6);
  CHECK(mahalanobis_weight(oracle::random_vector(rng, 6), oracle::random_vector(rng, 6), f) == 1.0);
}

TEST_CASE("mahalanobis_weight: scaled identity reduces to the RBF weight") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double omega = oracle::uniform(rng, 0.01, 3.0);
    const Vector d = oracle::random_vector(rng, 25, 0.3);
    const Vector x = oracle::random_vector(rng, 25, 0.3);
    const Matrix f = std::sqrt(omega) * Matrix::Identity(25, 25);
    CHECK(std::abs(mahalanobis_weight(d, x, f) - rbf_weight(d, x, omega)) <= 1e-12);
  }
}

TEST_CASE("mahalanobis_weight matches the explicit quadratic form") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix f = oracle::random_matrix(rng, 9, 9, 0.3);
    const Vector d = oracle::random_vector(rng, 9, 0.5);
    const Vector x = oracle::random_vector(rng, 9, 0.5);
    const Vector dx = d - x;
    const double q = dx.dot((f.transpose() * f) * dx);
    CHECK(mahalanobis_weight(d, x, f) == doctest::Approx(std::exp(-q)).epsilon(1e-12));
  }
}

TEST_CASE("metric built from F is positive semi-definite") {
  std::mt19937_64 rng(5);
  MahalanobisParams params{oracle::random_matrix(rng, 25, 25), oracle::random_matrix(rng, 25, 25)};
  Eigen::SelfAdjointEigenSolver<Matrix> eg(params.omega_global()), es(params.omega_specific());
  CHECK(eg.eigenvalues().minCoeff() >= -1e-10);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("weights stay in (0, 1] and flush only past the guard") {
  CHECK(guarded_exp_neg(0.0) == 1.0);
  CHECK(guarded_exp_neg(800.0) == 0.0);
  CHECK(guarded_exp_neg(600.0) > 0.0);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const double w = rbf_weight(oracle::random_vector(rng, 25), oracle::random_vector(rng, 25), 0.5);
    CHECK(w > 0.0);
    CHECK(w <= 1.0);
  }
}

TEST_CASE("equal distances: the specific block weighs less") {
  const FixedRbfParams params{0.4, 1.2};
  std::mt19937_64 rng(7);
  const Vector x = oracle::random_vector(rng, 25, 0.2);
  const Vector d = oracle::random_vector(rng, 25, 0.2);
  CHECK(rbf_weight(d, x, params.omega_specific) < rbf_weight(d, x, params.omega_global));
}

TEST_CASE("FixedRbfParams validation") {
  CHECK_NOTHROW((FixedRbfParams{0.1, 0.2}.validate()));
  CHECK_THROWS_AS((FixedRbfParams{0.2, 0.2}.validate()), InvalidArgument);
  CHECK_THROWS_AS((FixedRbfParams{0.0, 0.2}.validate()), InvalidArgument);
}

namespace {

struct GradientInstance {
  Matrix global, specific;
  Vector x, code;
  MahalanobisParams params;
};

GradientInstance random_instance(std::mt19937_64& rng, Index p, Index m, Index n) {
  GradientInstance g;
  g.global = oracle::unit_columns(oracle::random_matrix(rng, p, m));
  g.specific = oracle::unit_columns(oracle::random_matrix(rng, p, n));
  g.x = oracle::random_vector(rng, p, 0.3);
  g.code = oracle::random_vector(rng, m + n);
  for (Index k = 0; k < m + n; ++k)
    if (oracle::uniform(rng, 0.0, 1.0) < 0.4) g.code(k) = 0.0;
  g.params.f_global = oracle::random_matrix(rng, p, p, 0.5 / std::sqrt(double(p)));
  g.params.f_specific = oracle::random_matrix(rng, p, p, 0.8 / std::sqrt(double(p)));
  return g;
}

double relative_gradient_error(const GradientInstance& g, Block which) {
  const CompositeDictionary comp(BaseDictionary(g.global, Origin::external),
                                 BaseDictionary(g.specific, Origin::internal));
  const Matrix analytic = weight_gradient_F(comp, g.x, g.code, g.params, which);
  const Matrix fd = oracle::residual_gradient_fd(g.global, g.specific, g.x, g.code, g.params.f_global,
                                                 g.params.f_specific, which == Block::global);
  return (analytic - fd).norm() / std::max(fd.norm(), 1e-12);
}

}  // namespace

TEST_CASE("weight_gradient_F matches central finite differences") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const auto g = random_instance(rng, 6, 5, 3);
    CHECK(relative_gradient_error(g, Block::global) < 1e-4);
    CHECK(relative_gradient_error(g, Block::specific) < 1e-4);
  }
}

TEST_CASE("weight_gradient_F: zero code and coincident atom") {
  std::mt19937_64 rng(9);
  auto g = random_instance(rng, 5, 3, 2);
  const CompositeDictionary comp(BaseDictionary(g.global, Origin::external),
                                 BaseDictionary(g.specific, Origin::internal));
  CHECK(weight_gradient_F(comp, g.x, Vector::Zero(5), g.params, Block::global).isZero(0.0));

  Vector code = Vector::Zero(5);
  code(1) = 0.7;
  const Vector x = comp.global().atom(1);
  CHECK(weight_gradient_F(comp, x, code, g.params, Block::global).isZero(0.0));
  CHECK(weight_gradient_F(comp, x, code, g.params, Block::specific).isZero(0.0));
}
