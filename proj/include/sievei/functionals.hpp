#pragma once

#include <string>

#include "sievei/basis.hpp"
#include "sievei/linalg.hpp"

namespace sievei {

// Weight function for the integral functionals: an indicator on [lo, hi] or
// a Gaussian density truncated to [lo, hi].
struct Weight {
  enum class Kind { Uniform, TruncGauss } kind = Kind::Uniform;
  double lo = -1.0;
  double hi = 1.0;
  double mu = 0.0;
  double sigma = 1.0;

  double operator()(double y) const;

  static Weight uniform(double lo, double hi);
  // mu/sigma from the sample, truncated at its 1% and 99% quantiles.
  static Weight trunc_gauss_from(const Vec& data);
};

enum class FunctionalKind {
  PointEval,          // h(ybar)
  WeightedDeriv,      // int w(y) h'(y) dy
  Quadratic,          // (1/2) int w(y) h(y)^2 dy
  ExpPointEval,       // exp{h(ybar)}
  CurvatureQuadratic  // int w(y) h''(y)^2 dy
};

struct Functional {
  FunctionalKind kind = FunctionalKind::PointEval;
  double ybar = 0.0;
  Weight weight;
  int quad_nodes = 64;

  bool is_linear() const {
    return kind == FunctionalKind::PointEval ||
           kind == FunctionalKind::WeightedDeriv;
  }
};

double value(const Functional& f, const BasisSpec& basis, const Vec& beta);

// Sieve gradient d phi / dh [q^k], length basis.dim.
Vec gradient(const Functional& f, const BasisSpec& basis, const Vec& beta);

// Parse "eval:Y", "expeval:Y", "wderiv", "quad", "curv". The integral kinds
// take their weight from `weight`.
Functional parse_functional(const std::string& text, const Weight& weight);

}  // namespace sievei
