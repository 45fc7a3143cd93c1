#include "sievei/functionals.hpp"

#include <algorithm>
#include <cmath>

#include "sievei/prob.hpp"

namespace sievei {

double Weight::operator()(double y) const {
  if (y < lo || y > hi) return 0.0;
  if (kind == Kind::Uniform) return 1.0;
  const double z = (y - mu) / sigma;
  return std::exp(-0.5 * z * z) / sigma;
}

Weight Weight::uniform(double lo, double hi) {
  Weight w;
  w.kind = Kind::Uniform;
  w.lo = lo;
  w.hi = hi;
  return w;
}

Weight Weight::trunc_gauss_from(const Vec& data) {
  std::vector<double> sorted(data.data(), data.data() + data.size());
  std::sort(sorted.begin(), sorted.end());
  Weight w;
  w.kind = Kind::TruncGauss;
  w.mu = data.mean();
  w.sigma = std::sqrt((data.array() - w.mu).square().sum() /
                      static_cast<double>(data.size() - 1));
  w.lo = empirical_quantile(sorted, 0.01);
  w.hi = empirical_quantile(sorted, 0.99);
  return w;
}

namespace {

// Quadrature grid for int w(y) * (piecewise polynomial) dy: integrate over
// the weight's own interval so the indicator edge is exact, split at knots.
std::pair<Vec, Vec> weighted_nodes(const Functional& f, const BasisSpec& basis) {
  const double a = std::max(f.weight.lo, basis.support_lo);
  const double b = std::min(f.weight.hi, basis.support_hi);
  if (!(a < b)) throw ConfigError("functional: weight support is empty");
  return gauss_legendre_piecewise(f.quad_nodes, a, b, basis.knots);
}

void check_beta(const BasisSpec& basis, const Vec& beta) {
  if (beta.size() != basis.dim)
    throw ConfigError("functional: beta length does not match basis dim");
}

Vec weight_at(const Functional& f, const Vec& x) {
  Vec w(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) w(i) = f.weight(x(i));
  return w;
}

}  // namespace

double value(const Functional& f, const BasisSpec& basis, const Vec& beta) {
  check_beta(basis, beta);
  switch (f.kind) {
    case FunctionalKind::PointEval: {
      Vec pt(1);
      pt(0) = f.ybar;
      return (eval_basis(basis, pt, 0) * beta)(0);
    }
    case FunctionalKind::ExpPointEval: {
      Vec pt(1);
      pt(0) = f.ybar;
      return std::exp((eval_basis(basis, pt, 0) * beta)(0));
    }
    case FunctionalKind::WeightedDeriv: {
      auto [x, w] = weighted_nodes(f, basis);
      const Vec wy = weight_at(f, x);
      const Vec dh = eval_basis(basis, x, 1) * beta;
      return (w.array() * wy.array() * dh.array()).sum();
    }
    case FunctionalKind::Quadratic: {
      auto [x, w] = weighted_nodes(f, basis);
      const Vec wy = weight_at(f, x);
      const Vec h = eval_basis(basis, x, 0) * beta;
      return 0.5 * (w.array() * wy.array() * h.array().square()).sum();
    }
    case FunctionalKind::CurvatureQuadratic: {
      auto [x, w] = weighted_nodes(f, basis);
      const Vec wy = weight_at(f, x);
      const Vec d2h = eval_basis(basis, x, 2) * beta;
      return (w.array() * wy.array() * d2h.array().square()).sum();
    }
  }
  throw ConfigError("functional: unknown kind");
}

Vec gradient(const Functional& f, const BasisSpec& basis, const Vec& beta) {
  check_beta(basis, beta);
  switch (f.kind) {
    case FunctionalKind::PointEval: {
      Vec pt(1);
      pt(0) = f.ybar;
      return eval_basis(basis, pt, 0).row(0).transpose();
    }
    case FunctionalKind::ExpPointEval: {
      Vec pt(1);
      pt(0) = f.ybar;
      const Vec q = eval_basis(basis, pt, 0).row(0).transpose();
      return std::exp(q.dot(beta)) * q;
    }
    case FunctionalKind::WeightedDeriv: {
      auto [x, w] = weighted_nodes(f, basis);
      const Vec wy = weight_at(f, x);
      const Mat dq = eval_basis(basis, x, 1);
      return dq.transpose() * (w.array() * wy.array()).matrix();
    }
    case FunctionalKind::Quadratic: {
      auto [x, w] = weighted_nodes(f, basis);
      const Vec wy = weight_at(f, x);
      const Mat q = eval_basis(basis, x, 0);
      const Vec h = q * beta;
      return q.transpose() * (w.array() * wy.array() * h.array()).matrix();
    }
    case FunctionalKind::CurvatureQuadratic: {
      auto [x, w] = weighted_nodes(f, basis);
      const Vec wy = weight_at(f, x);
      const Mat d2q = eval_basis(basis, x, 2);
      const Vec d2h = d2q * beta;
      return 2.0 * d2q.transpose() *
             (w.array() * wy.array() * d2h.array()).matrix();
    }
  }
  throw ConfigError("functional: unknown kind");
}

Functional parse_functional(const std::string& text, const Weight& weight) {
  Functional f;
  f.weight = weight;
  if (text.rfind("eval:", 0) == 0) {
    f.kind = FunctionalKind::PointEval;
    f.ybar = std::atof(text.c_str() + 5);
    return f;
  }
  if (text.rfind("expeval:", 0) == 0) {
    f.kind = FunctionalKind::ExpPointEval;
    f.ybar = std::atof(text.c_str() + 8);
    return f;
  }
  if (text == "wderiv") {
    f.kind = FunctionalKind::WeightedDeriv;
    return f;
  }
  if (text == "quad") {
    f.kind = FunctionalKind::Quadratic;
    return f;
  }
  if (text == "curv") {
    f.kind = FunctionalKind::CurvatureQuadratic;
    return f;
  }
  throw ConfigError("unknown functional: " + text +
                    " (expected eval:Y, expeval:Y, wderiv, quad, curv)");
}

}  // namespace sievei
