#include <doctest.h>

#include <random>

#include "sievei/functionals.hpp"

using namespace sievei;

namespace {

Vec random_beta(int k, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Vec b(k);
  for (int j = 0; j < k; ++j) b(j) = nd(gen);
  return b;
}

Functional make(FunctionalKind kind, double ybar = 0.0) {
  Functional f;
  f.kind = kind;
  f.ybar = ybar;
  f.weight = Weight::uniform(-1.0, 1.0);
  f.quad_nodes = 32;
  return f;
}

}  // namespace

TEST_CASE("point evaluation picks out the constant coefficient at zero") {
  const BasisSpec b = make_power_series(3, -1.0, 1.0);
  Vec beta(3);
  beta << 1.7, -2.0, 0.3;
  CHECK(value(make(FunctionalKind::PointEval, 0.0), b, beta) ==
        doctest::Approx(1.7));
}

TEST_CASE("exp point evaluation at beta = 0 is one") {
  const BasisSpec b = make_power_series(2, -1.0, 1.0);
  CHECK(value(make(FunctionalKind::ExpPointEval, 0.0), b, Vec::Zero(2)) ==
        doctest::Approx(1.0));
  const Vec g = gradient(make(FunctionalKind::ExpPointEval, 0.0), b, Vec::Zero(2));
  CHECK(g(0) == doctest::Approx(1.0));
  CHECK(g(1) == doctest::Approx(0.0));
}

TEST_CASE("quadratic functional of h(y) = y on [-1,1] is 1/3") {
  const BasisSpec b = make_power_series(2, -1.0, 1.0);
  Vec beta(2);
  beta << 0.0, 1.0;
  // (1/2) int_{-1}^{1} y^2 dy = 1/3
  CHECK(value(make(FunctionalKind::Quadratic), b, beta) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("point-eval gradient is the basis vector") {
  const BasisSpec b = make_power_series(3, -1.0, 1.0);
  const Vec g =
      gradient(make(FunctionalKind::PointEval, 0.5), b, random_beta(3, 2));
  CHECK(g(0) == doctest::Approx(1.0));
  CHECK(g(1) == doctest::Approx(0.5));
  CHECK(g(2) == doctest::Approx(0.25));
}

TEST_CASE("every functional kind: gradient matches finite differences") {
  const BasisSpec pol = make_power_series(4, -1.0, 1.0);
  const BasisSpec spline = make_poly_spline(3, {-0.2, 0.3}, -1.0, 1.0);
  const double h = 1e-6;
  for (const BasisSpec& basis : {pol, spline}) {
    for (auto kind :
         {FunctionalKind::PointEval, FunctionalKind::WeightedDeriv,
          FunctionalKind::Quadratic, FunctionalKind::ExpPointEval,
          FunctionalKind::CurvatureQuadratic}) {
      const Functional f = make(kind, 0.3);
      const Vec beta = random_beta(basis.dim, 7 + static_cast<int>(kind));
      const Vec g = gradient(f, basis, beta);
      for (int j = 0; j < basis.dim; ++j) {
        Vec bp = beta, bm = beta;
        bp(j) += h;
        bm(j) -= h;
        const double fd = (value(f, basis, bp) - value(f, basis, bm)) / (2 * h);
        CHECK(g(j) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("linear functionals have beta-independent gradients") {
  const BasisSpec b = make_power_series(4, -1.0, 1.0);
  for (auto kind : {FunctionalKind::PointEval, FunctionalKind::WeightedDeriv}) {
    const Functional f = make(kind, 0.2);
    const Vec g1 = gradient(f, b, random_beta(4, 11));
    const Vec g2 = gradient(f, b, random_beta(4, 13));
    CHECK((g1 - g2).norm() < 1e-14);
  }
}

TEST_CASE("weighted derivative with uniform weight integrates exactly") {
  // int_{-1}^{1} d/dy (y^2) dy = y^2 |_{-1}^{1} = 0; of y^3: 2.
  const BasisSpec b = make_power_series(4, -1.0, 1.0);
  Vec beta = Vec::Zero(4);
  beta(3) = 1.0;
  CHECK(value(make(FunctionalKind::WeightedDeriv), b, beta) ==
        doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("truncated gaussian weight from data") {
  Vec data(200);
  std::mt19937 gen(3);
  std::normal_distribution<double> nd(0.5, 2.0);
  for (int i = 0; i < 200; ++i) data(i) = nd(gen);
  const Weight w = Weight::trunc_gauss_from(data);
  CHECK(w.mu == doctest::Approx(0.5).epsilon(0.5));
  CHECK(w(w.lo - 1.0) == 0.0);
  CHECK(w(w.hi + 1.0) == 0.0);
  CHECK(w(w.mu) > 0.0);
}

TEST_CASE("functional strings parse") {
  const Weight w = Weight::uniform(-1, 1);
  CHECK(parse_functional("eval:0.5", w).kind == FunctionalKind::PointEval);
  CHECK(parse_functional("eval:0.5", w).ybar == doctest::Approx(0.5));
  CHECK(parse_functional("expeval:0", w).kind == FunctionalKind::ExpPointEval);
  CHECK(parse_functional("wderiv", w).kind == FunctionalKind::WeightedDeriv);
  CHECK(parse_functional("quad", w).kind == FunctionalKind::Quadratic);
  CHECK(parse_functional("curv", w).kind == FunctionalKind::CurvatureQuadratic);
  CHECK_THROWS_AS(parse_functional("huh", w), ConfigError);
}
