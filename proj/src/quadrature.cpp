#include "vesflow/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace vesflow {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Smooth factor left after peeling the periodic log off the single layer:
//   -log rho = -1/2 log(4 sin^2((ai-aj)/2)) - 1/2 log(rho^2 / (4 sin^2)).
// Returns the 2x2 kernel block of the smooth remainder, including the
// r r^T / rho^2 part, with its diagonal limit at i == j.
Matrix2d slp_smooth_block(const Curve& c, const GeometryCache& g, int i,
                          int j, double mu0) {
  const double pref = 1.0 / (4.0 * M_PI * mu0);
  if (i == j) {
    Vector2d t = g.tangent.col(i);
    return pref * (-std::log(g.jacobian[i]) * Matrix2d::Identity() +
                   t * t.transpose());
  }
  const int n = c.n();
  double da = kTwoPi * (i - j) / n;
  Vector2d r = c.x.col(i) - c.x.col(j);
  double rho2 = r.squaredNorm();
  double s = 2.0 * std::sin(0.5 * da);
  Matrix2d out = (r * r.transpose()) / rho2;
  out -= 0.5 * std::log(rho2 / (s * s)) * Matrix2d::Identity();
  return pref * out;
}
}  // namespace

const VectorXd& kress_log_weights(int n) {
  require_pow2(n, "quadrature size");
  static std::mutex mtx;
  static std::map<int, VectorXd> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  VectorXd coeffs = VectorXd::Zero(n / 2 + 1);
  for (int m = 1; m < n / 2; ++m) coeffs[m] = 1.0 / m;
  coeffs[n / 2] = 1.0 / n;
  VectorXd r = (-2.0 * kTwoPi / n) * cosine_series_at_nodes(coeffs);
  return cache.emplace(n, std::move(r)).first->second;
}

MatrixXd stokes_slp_self_matrix(const Curve& c, const GeometryCache& g,
                                double mu0) {
  const int n = c.n();
  const VectorXd& r = kress_log_weights(n);
  const double logc = -1.0 / (8.0 * M_PI * mu0);
  MatrixXd out(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Matrix2d k = slp_smooth_block(c, g, i, j, mu0) * (kTwoPi / n);
      double w = logc * r[(j - i + n) % n];
      k(0, 0) += w;
      k(1, 1) += w;
      k *= g.jacobian[j];
      out(i, j) = k(0, 0);
      out(i, n + j) = k(0, 1);
      out(n + i, j) = k(1, 0);
      out(n + i, n + j) = k(1, 1);
    }
  }
  return out;
}

MatrixXd stokes_slp_self_row(const Curve& c, const GeometryCache& g, int i,
                             double mu0) {
  const int n = c.n();
  const VectorXd& r = kress_log_weights(n);
  const double logc = -1.0 / (8.0 * M_PI * mu0);
  MatrixXd out(2, 2 * n);
  for (int j = 0; j < n; ++j) {
    Matrix2d k = slp_smooth_block(c, g, i, j, mu0) * (kTwoPi / n);
    double w = logc * r[(j - i + n) % n];
    k(0, 0) += w;
    k(1, 1) += w;
    k *= g.jacobian[j];
    out(0, j) = k(0, 0);
    out(0, n + j) = k(0, 1);
    out(1, j) = k(1, 0);
    out(1, n + j) = k(1, 1);
  }
  return out;
}

namespace {
Matrix2d dlp_self_block(const Curve& c, const GeometryCache& g, int i, int j,
                        double nu, double normal_sign) {
  const double pref = normal_sign * (1.0 - nu) / M_PI;
  if (i == j) {
    Vector2d t = g.tangent.col(i);
    return pref * (-0.5 * g.curvature[i]) * (t * t.transpose());
  }
  Vector2d r = c.x.col(i) - c.x.col(j);
  double rho2 = r.squaredNorm();
  return pref * (r.dot(g.normal.col(j)) / rho2) * (r * r.transpose()) / rho2;
}
}  // namespace

MatrixXd stokes_dlp_self_matrix(const Curve& c, const GeometryCache& g,
                                double nu, double normal_sign) {
  const int n = c.n();
  MatrixXd out(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Matrix2d k = dlp_self_block(c, g, i, j, nu, normal_sign) * g.ds[j];
      out(i, j) = k(0, 0);
      out(i, n + j) = k(0, 1);
      out(n + i, j) = k(1, 0);
      out(n + i, n + j) = k(1, 1);
    }
  }
  return out;
}

MatrixXd stokes_dlp_self_row(const Curve& c, const GeometryCache& g, int i,
                             double nu, double normal_sign) {
  const int n = c.n();
  MatrixXd out(2, 2 * n);
  for (int j = 0; j < n; ++j) {
    Matrix2d k = dlp_self_block(c, g, i, j, nu, normal_sign) * g.ds[j];
    out(0, j) = k(0, 0);
    out(0, n + j) = k(0, 1);
    out(1, j) = k(1, 0);
    out(1, n + j) = k(1, 1);
  }
  return out;
}

namespace {
double laplace_self_entry(const Curve& c, const GeometryCache& g, int i,
                          int j, double normal_sign) {
  if (i == j) return normal_sign * g.curvature[i] / (2.0 * kTwoPi);
  Vector2d r = c.x.col(i) - c.x.col(j);
  return -normal_sign * r.dot(g.normal.col(j)) / (kTwoPi * r.squaredNorm());
}
}  // namespace

MatrixXd laplace_dlp_self_matrix(const Curve& c, const GeometryCache& g,
                                 double normal_sign) {
  const int n = c.n();
  MatrixXd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = laplace_self_entry(c, g, i, j, normal_sign) * g.ds[j];
  return out;
}

VectorXd laplace_dlp_self_row(const Curve& c, const GeometryCache& g, int i,
                              double normal_sign) {
  const int n = c.n();
  VectorXd out(n);
  for (int j = 0; j < n; ++j)
    out[j] = laplace_self_entry(c, g, i, j, normal_sign) * g.ds[j];
  return out;
}

MatrixXd stokes_slp_matrix(const Curve& c, const GeometryCache& g,
                           const Matrix2Xd& targets, double mu0) {
  const int n = c.n(), t = static_cast<int>(targets.cols());
  MatrixXd out(2 * t, 2 * n);
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < n; ++j) {
      Matrix2d k = stokes_slp_kernel(targets.col(i), c.x.col(j), mu0) * g.ds[j];
      out(i, j) = k(0, 0);
      out(i, n + j) = k(0, 1);
      out(t + i, j) = k(1, 0);
      out(t + i, n + j) = k(1, 1);
    }
  }
  return out;
}

MatrixXd stokes_dlp_matrix(const Curve& c, const GeometryCache& g,
                           const Matrix2Xd& targets, double nu,
                           double normal_sign) {
  const int n = c.n(), t = static_cast<int>(targets.cols());
  MatrixXd out(2 * t, 2 * n);
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < n; ++j) {
      Matrix2d k = normal_sign *
                   stokes_dlp_kernel(targets.col(i), c.x.col(j),
                                     g.normal.col(j), nu) *
                   g.ds[j];
      out(i, j) = k(0, 0);
      out(i, n + j) = k(0, 1);
      out(t + i, j) = k(1, 0);
      out(t + i, n + j) = k(1, 1);
    }
  }
  return out;
}

MatrixXd laplace_dlp_matrix(const Curve& c, const GeometryCache& g,
                            const Matrix2Xd& targets, double normal_sign) {
  const int n = c.n(), t = static_cast<int>(targets.cols());
  MatrixXd out(t, n);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = normal_sign *
                  laplace_dlp_kernel(targets.col(i), c.x.col(j),
                                     g.normal.col(j)) *
                  g.ds[j];
  return out;
}

Matrix2Xd apply_stokes_slp_self(const Curve& c, const GeometryCache& g,
                                const Matrix2Xd& density, double mu0) {
  return unstack_xy(stokes_slp_self_matrix(c, g, mu0) * stack_xy(density));
}

Matrix2Xd apply_stokes_dlp_self(const Curve& c, const GeometryCache& g,
                                const Matrix2Xd& density, double nu,
                                double normal_sign) {
  return unstack_xy(stokes_dlp_self_matrix(c, g, nu, normal_sign) *
                    stack_xy(density));
}

}  // namespace vesflow
