#include "sievei/linalg.hpp"

#include <cmath>

namespace sievei {

ProjectionCache::ProjectionCache(Mat P, double rtol) : P_(std::move(P)) {
  if (!P_.allFinite()) throw NumericError("ProjectionCache: non-finite design");
  if (rtol < 0.0)
    rtol = 1e-12 * static_cast<double>(std::max(P_.rows(), P_.cols()));
  Eigen::JacobiSVD<Mat> svd(P_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double cutoff = (s.size() > 0) ? rtol * s(0) : 0.0;
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > cutoff) ++r;
  rank_ = r;
  U1_ = svd.matrixU().leftCols(r);
  V1_ = svd.matrixV().leftCols(r);
  s1_ = s.head(r);
  PtP_pinv_ = V1_ * s1_.array().square().inverse().matrix().asDiagonal() *
              V1_.transpose();
}

Vec ProjectionCache::project(const Vec& v) const {
  if (v.size() != P_.rows())
    throw ConfigError("projection: vector length does not match sample size");
  return U1_ * (U1_.transpose() * v);
}

Mat ProjectionCache::project(const Mat& m) const {
  if (m.rows() != P_.rows())
    throw ConfigError("projection: row count does not match sample size");
  return U1_ * (U1_.transpose() * m);
}

Vec ProjectionCache::ls_coefficients(const Vec& v) const {
  if (v.size() != P_.rows())
    throw ConfigError("projection: vector length does not match sample size");
  return V1_ * (s1_.array().inverse().matrix().asDiagonal() *
                (U1_.transpose() * v));
}

double projection_quadform(const ProjectionCache& cache, const Vec& v) {
  if (v.size() != cache.n())
    throw ConfigError("projection_quadform: length mismatch");
  return cache.half_projection(v).squaredNorm();
}

std::pair<Vec, Vec> gauss_legendre(int nodes, double a, double b) {
  if (nodes < 1) throw ConfigError("gauss_legendre: nodes must be >= 1");
  if (!(a < b)) throw ConfigError("gauss_legendre: need a < b");
  Vec x(nodes), w(nodes);
  const int m = (nodes + 1) / 2;
  // Newton iteration on Legendre polynomials, standard Golub-Welsch-free
  // recipe; converges in a handful of steps.
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (nodes + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < nodes; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = nodes * (z * p0 - p1) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p0 / pp;
      if (std::fabs(z - z1) < 1e-15) break;
    }
    x(i) = -z;
    x(nodes - 1 - i) = z;
    w(i) = 2.0 / ((1.0 - z * z) * pp * pp);
    w(nodes - 1 - i) = w(i);
  }
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  Vec xs = (x.array() * half + mid).matrix();
  Vec ws = (w.array() * half).matrix();
  return {xs, ws};
}

std::pair<Vec, Vec> gauss_legendre_piecewise(int nodes_per_piece, double a,
                                             double b,
                                             const std::vector<double>& breaks) {
  std::vector<double> edges;
  edges.push_back(a);
  for (double t : breaks)
    if (t > a && t < b) edges.push_back(t);
  edges.push_back(b);
  const auto pieces = static_cast<Eigen::Index>(edges.size()) - 1;
  Vec xs(pieces * nodes_per_piece), ws(pieces * nodes_per_piece);
  for (Eigen::Index k = 0; k < pieces; ++k) {
    auto [x, w] = gauss_legendre(nodes_per_piece, edges[k], edges[k + 1]);
    xs.segment(k * nodes_per_piece, nodes_per_piece) = x;
    ws.segment(k * nodes_per_piece, nodes_per_piece) = w;
  }
  return {xs, ws};
}

}  // namespace sievei
