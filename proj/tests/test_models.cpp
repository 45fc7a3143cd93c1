#include <doctest.h>

#include <random>

#include "sievei/models.hpp"

using namespace sievei;

namespace {

Dataset small_data(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Dataset d;
  d.n = n;
  d.y1.resize(n);
  d.y2.resize(n);
  d.x.resize(n, 1);
  for (int i = 0; i < n; ++i) {
    d.x(i, 0) = nd(gen);
    d.y2(i) = 0.8 * d.x(i, 0) + 0.3 * nd(gen);
    d.y1(i) = 1.0 + d.y2(i) + 0.5 * nd(gen);
  }
  return d;
}

ModelSpec npiv_spec(const Dataset& d, int k, int J, double lambda = 0.0) {
  ModelSpec spec;
  spec.kind = ModelKind::NPIV;
  spec.qbasis = make_power_series(k, d.y2.minCoeff() - 1e-9,
                                  d.y2.maxCoeff() + 1e-9);
  spec.pbasis = make_power_series(J, d.x.col(0).minCoeff() - 1e-9,
                                  d.x.col(0).maxCoeff() + 1e-9);
  spec.lambda = lambda;
  return spec;
}

SigmaHat ones_sigma(int n) {
  SigmaHat s;
  s.constant = true;
  s.constant_value = 1.0;
  s.values = Vec::Constant(n, 1.0);
  return s;
}

}  // namespace

TEST_CASE("NPIV residuals at beta = 0 are the outcomes") {
  const Dataset d = small_data(6, 1);
  const ModelSpec spec = npiv_spec(d, 2, 3);
  CHECK((residuals(spec, d, Vec::Zero(2)) - d.y1).norm() == 0.0);
}

TEST_CASE("NPIV residuals with q = (1, y2), beta = (1,1)") {
  const Dataset d = small_data(3, 2);
  const ModelSpec spec = npiv_spec(d, 2, 3);
  Vec beta(2);
  beta << 1.0, 1.0;
  const Vec rho = residuals(spec, d, beta);
  for (int i = 0; i < 3; ++i)
    CHECK(rho(i) == doctest::Approx(d.y1(i) - 1.0 - d.y2(i)).epsilon(1e-14));
}

TEST_CASE("NPQIV residuals saturate at 1 - gamma when h dominates y1") {
  const Dataset d = small_data(5, 3);
  ModelSpec spec = npiv_spec(d, 1, 2);
  spec.kind = ModelKind::NPQIV;
  spec.gamma = 0.5;
  const Vec rho =
      residuals(spec, d, Vec::Constant(1, d.y1.maxCoeff() + 10.0));
  for (int i = 0; i < 5; ++i) CHECK(rho(i) == doctest::Approx(0.5));
}

TEST_CASE("m_hat of zero residuals is zero, constant instrument averages") {
  const Dataset d = small_data(4, 4);
  const ModelSpec spec = npiv_spec(d, 2, 1);  // p = (1): J = 1
  ProjectionCache cache(instrument_design(spec, d));
  // rho == 0: fit y1 exactly via a fabricated beta is awkward; instead check
  // linearity-based zero: m_hat(rho) - m_hat(rho) = 0 by direct call on a
  // dataset whose y1 equals the fit.
  Dataset dz = d;
  Vec beta(2);
  beta << 0.5, -1.0;
  dz.y1 = structural_design(spec, d) * beta;
  CHECK(m_hat(spec, dz, beta, cache).norm() < 1e-14);

  // p == 1: the series LS fit of rho is its mean everywhere.
  const Vec rho = residuals(spec, d, beta);
  const Vec mh = m_hat(spec, d, beta, cache);
  for (int i = 0; i < 4; ++i)
    CHECK(mh(i) == doctest::Approx(rho.mean()).epsilon(1e-12));
  // and at arbitrary evaluation points too
  Vec pts(2);
  pts << -5.0, 7.7;
  const Vec mh_pts = m_hat(spec, d, beta, cache, pts);
  CHECK(mh_pts(0) == doctest::Approx(rho.mean()).epsilon(1e-12));
  CHECK(mh_pts(1) == doctest::Approx(rho.mean()).epsilon(1e-12));
}

TEST_CASE("m_hat is linear in the residuals") {
  const Dataset d = small_data(9, 5);
  const ModelSpec spec = npiv_spec(d, 2, 3);
  ProjectionCache cache(instrument_design(spec, d));
  Vec b1(2), b2(2);
  b1 << 0.2, 1.0;
  b2 << -0.7, 0.4;
  // rho(b1) + rho(b2) = (y1 - Qb1) + (y1 - Qb2) = rho at (b1+b2) plus y1;
  // check additivity through the raw projection instead.
  const Vec r1 = residuals(spec, d, b1);
  const Vec r2 = residuals(spec, d, b2);
  const Vec sum = cache.project(r1) + cache.project(r2);
  const Vec joint = cache.project(Vec(r1 + r2));
  CHECK((sum - joint).norm() < 1e-10);
}

TEST_CASE("criterion: zero residuals give zero; weighting scales") {
  const Dataset d = small_data(8, 6);
  const ModelSpec spec = npiv_spec(d, 2, 3);
  ProjectionCache cache(instrument_design(spec, d));
  Dataset dz = d;
  Vec beta(2);
  beta << 1.0, 0.5;
  dz.y1 = structural_design(spec, d) * beta;
  CHECK(criterion(spec, dz, beta, cache, ones_sigma(8)) ==
        doctest::Approx(0.0).epsilon(1e-16));

  // identity weighting vs KnownScalar(1) produce identical values
  SigmaHat known = ones_sigma(8);
  known.constant_value = 1.0;
  const double q1 = criterion(spec, d, beta, cache, ones_sigma(8));
  const double q2 = criterion(spec, d, beta, cache, known);
  CHECK(q1 == doctest::Approx(q2).epsilon(1e-15));
  CHECK(q1 >= 0.0);
}

TEST_CASE("criterion quadratic-form shortcut equals the direct loop") {
  const Dataset d = small_data(11, 7);
  const ModelSpec spec = npiv_spec(d, 3, 4);
  ProjectionCache cache(instrument_design(spec, d));
  Vec beta(3);
  beta << 0.3, -0.2, 0.9;
  SigmaHat sig = ones_sigma(11);
  sig.constant_value = 1.7;
  sig.values = Vec::Constant(11, 1.7);
  const double fast = criterion(spec, d, beta, cache, sig);
  // direct loop oracle
  const Vec mh = m_hat(spec, d, beta, cache);
  double slow = 0.0;
  for (int i = 0; i < 11; ++i) slow += mh(i) * mh(i) / 1.7;
  slow /= 11.0;
  CHECK(fast == doctest::Approx(slow).epsilon(1e-10));
}

TEST_CASE("criterion rejects nonpositive weighting") {
  const Dataset d = small_data(5, 8);
  const ModelSpec spec = npiv_spec(d, 2, 2);
  ProjectionCache cache(instrument_design(spec, d));
  SigmaHat bad;
  bad.constant = false;
  bad.values = Vec::Constant(5, -1.0);
  CHECK_THROWS_AS(criterion(spec, d, Vec::Zero(2), cache, bad), NumericError);
}

TEST_CASE("NPIV criterion is convex in beta at lambda = 0") {
  const Dataset d = small_data(14, 9);
  const ModelSpec spec = npiv_spec(d, 3, 5);
  ProjectionCache cache(instrument_design(spec, d));
  std::mt19937 gen(10);
  std::normal_distribution<double> nd;
  const SigmaHat sig = ones_sigma(14);
  for (int t = 0; t < 25; ++t) {
    Vec a(3), b(3);
    for (int j = 0; j < 3; ++j) {
      a(j) = nd(gen);
      b(j) = nd(gen);
    }
    const Vec mid = 0.5 * (a + b);
    const double lhs = criterion(spec, d, mid, cache, sig);
    const double rhs = 0.5 * (criterion(spec, d, a, cache, sig) +
                              criterion(spec, d, b, cache, sig));
    CHECK(lhs <= rhs + 1e-12);
  }
}

TEST_CASE("dmhat for exogenous identity design reproduces the basis") {
  // Y2 = X, q = p, J = k: the projection of the basis onto itself.
  Dataset d = small_data(10, 11);
  d.y2 = d.x.col(0);
  const ModelSpec spec = npiv_spec(d, 3, 3);
  ProjectionCache cache(instrument_design(spec, d));
  const Mat dm = dmhat_matrix(spec, d, Vec::Zero(3), cache);
  const Mat q = structural_design(spec, d);
  CHECK((dm - q).norm() < 1e-8 * q.norm());
}

TEST_CASE("dmhat with constant sieve is all ones") {
  const Dataset d = small_data(7, 12);
  const ModelSpec spec = npiv_spec(d, 1, 2);
  ProjectionCache cache(instrument_design(spec, d));
  const Mat dm = dmhat_matrix(spec, d, Vec::Zero(1), cache);
  for (int i = 0; i < 7; ++i) CHECK(dm(i, 0) == doctest::Approx(1.0));
}

TEST_CASE("dmhat is constant in beta for NPIV") {
  const Dataset d = small_data(9, 13);
  const ModelSpec spec = npiv_spec(d, 2, 4);
  ProjectionCache cache(instrument_design(spec, d));
  Vec b1(2), b2(2);
  b1 << 5.0, -3.0;
  b2 << 0.1, 0.2;
  CHECK((dmhat_matrix(spec, d, b1, cache) - dmhat_matrix(spec, d, b2, cache))
            .norm() == 0.0);
}

TEST_CASE("dmhat for NPQIV requires the numeric flag") {
  const Dataset d = small_data(8, 14);
  ModelSpec spec = npiv_spec(d, 2, 3);
  spec.kind = ModelKind::NPQIV;
  ProjectionCache cache(instrument_design(spec, d));
  CHECK_THROWS_AS(dmhat_matrix(spec, d, Vec::Zero(2), cache),
                  NonSmoothResidualError);
  spec.numeric_derivative = true;
  const Mat dm = dmhat_matrix(spec, d, Vec::Zero(2), cache);
  CHECK(dm.allFinite());
}

TEST_CASE("sigma0 for NPQIV is exactly gamma(1-gamma)") {
  const Dataset d = small_data(6, 15);
  ModelSpec spec = npiv_spec(d, 2, 3);
  spec.kind = ModelKind::NPQIV;
  spec.gamma = 0.5;
  ProjectionCache cache(instrument_design(spec, d));
  const SigmaHat s = sigma0_series(spec, d, Vec::Zero(2), cache);
  for (int i = 0; i < 6; ++i) CHECK(s.values(i) == 0.25);
  spec.gamma = 0.3;
  const SigmaHat s3 = sigma0_series(spec, d, Vec::Zero(2), cache);
  CHECK(s3.values(0) == doctest::Approx(0.21));
}

TEST_CASE("sigma0 with constant instrument is the mean squared residual") {
  const Dataset d = small_data(12, 16);
  const ModelSpec spec = npiv_spec(d, 2, 1);  // p == 1
  ProjectionCache cache(instrument_design(spec, d));
  Vec beta(2);
  beta << 0.4, 0.8;
  const Vec u = residuals(spec, d, beta);
  const SigmaHat s = sigma0_series(spec, d, beta, cache);
  for (int i = 0; i < 12; ++i)
    CHECK(s.values(i) ==
          doctest::Approx(u.array().square().mean()).epsilon(1e-12));
}

TEST_CASE("sigma0 series fit is clamped below") {
  // Force a negative series fit: J = 2 with a steep instrument trend.
  Dataset d;
  d.n = 4;
  d.y1.resize(4);
  d.y2.resize(4);
  d.x.resize(4, 1);
  d.y2 << -1.0, -0.5, 0.5, 1.0;
  d.x << -1.0, -0.5, 0.5, 1.0;
  d.y1 << 2.0, 0.0, 0.0, 0.1;  // u^2 pattern decreasing steeply
  const ModelSpec spec = npiv_spec(d, 1, 2);
  ProjectionCache cache(instrument_design(spec, d));
  const SigmaHat s = sigma0_series(spec, d, Vec::Zero(1), cache);
  const double floor = 1e-6 * d.y1.array().square().mean();
  CHECK(s.values.minCoeff() >= floor - 1e-18);
  CHECK(s.values.minCoeff() == doctest::Approx(floor));
}

TEST_CASE("sigma0 rejects an exact fit") {
  const Dataset d = small_data(5, 17);
  const ModelSpec spec = npiv_spec(d, 2, 2);
  ProjectionCache cache(instrument_design(spec, d));
  Dataset dz = d;
  Vec beta(2);
  beta << 1.0, 1.0;
  dz.y1 = structural_design(spec, d) * beta;
  CHECK_THROWS_AS(sigma0_series(spec, dz, beta, cache), NumericError);
}

TEST_CASE("tensor instruments expand the design") {
  Dataset d = small_data(6, 18);
  Mat x2(6, 2);
  x2.col(0) = d.x.col(0);
  x2.col(1) = d.y2;
  d.x = x2;
  ModelSpec spec = npiv_spec(d, 2, 3);
  CHECK(instrument_design(spec, d).cols() == 3);  // first column only
  spec.tensor_x = true;
  CHECK(instrument_design(spec, d).cols() == 9);  // 3 x 3 tensor
}
