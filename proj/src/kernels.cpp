#include "vesflow/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace vesflow {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

void require_distinct(const Vector2d& x, const Vector2d& y) {
  if ((x - y).squaredNorm() == 0.0)
    throw std::invalid_argument("kernel evaluated at coincident points");
}
}  // namespace

Matrix2d stokes_slp_kernel(const Vector2d& x, const Vector2d& y, double mu0) {
  require_distinct(x, y);
  Vector2d r = x - y;
  double rho2 = r.squaredNorm();
  Matrix2d out = (r * r.transpose()) / rho2;
  out -= 0.5 * std::log(rho2) * Matrix2d::Identity();
  return out / (4.0 * M_PI * mu0);
}

Matrix2d stokes_dlp_kernel(const Vector2d& x, const Vector2d& y,
                           const Vector2d& ny, double nu) {
  require_distinct(x, y);
  Vector2d r = x - y;
  double rho2 = r.squaredNorm();
  return ((1.0 - nu) / M_PI) * (r.dot(ny) / rho2) * (r * r.transpose()) / rho2;
}

double laplace_dlp_kernel(const Vector2d& x, const Vector2d& y,
                          const Vector2d& ny) {
  require_distinct(x, y);
  Vector2d r = x - y;
  return -r.dot(ny) / (kTwoPi * r.squaredNorm());
}

Vector2d stokeslet(const Vector2d& x, const Vector2d& c,
                   const Vector2d& lambda, double mu0) {
  return stokes_slp_kernel(x, c, mu0) * lambda;
}

Vector2d rotlet(const Vector2d& x, const Vector2d& c, double xi, double mu0) {
  require_distinct(x, c);
  Vector2d r = x - c;
  return (xi / mu0) * Vector2d(r[1], -r[0]) / r.squaredNorm();
}

MatrixXd stokeslet_rotlet_matrix(const Matrix2Xd& targets, const Vector2d& c,
                                 double mu0) {
  const int t = static_cast<int>(targets.cols());
  MatrixXd out(2 * t, 3);
  for (int i = 0; i < t; ++i) {
    Matrix2d s = stokes_slp_kernel(targets.col(i), c, mu0);
    Vector2d r = targets.col(i) - c;
    Vector2d rot = Vector2d(r[1], -r[0]) / (mu0 * r.squaredNorm());
    out(i, 0) = s(0, 0);
    out(i, 1) = s(0, 1);
    out(t + i, 0) = s(1, 0);
    out(t + i, 1) = s(1, 1);
    out(i, 2) = rot[0];
    out(t + i, 2) = rot[1];
  }
  return out;
}

Vesicle::Vesicle(Curve c, double nu_, double kappa_)
    : curve(std::move(c)), geom(compute_geometry(curve)), nu(nu_),
      kappa(kappa_) {
  sigma = VectorXd::Zero(curve.n());
}

WallComponent::WallComponent(Curve c, bool outer_)
    : curve(std::move(c)), geom(compute_geometry(curve)), outer(outer_) {
  velocity = Matrix2Xd::Zero(2, curve.n());
  center = geom.centroid;
}

MatrixXd bending_matrix(const GeometryCache& g, double kappa) {
  const int n = static_cast<int>(g.jacobian.size());
  MatrixXd d4 = arclength_diff_matrix(g, 4);
  MatrixXd out = MatrixXd::Zero(2 * n, 2 * n);
  out.topLeftCorner(n, n) = -kappa * d4;
  out.bottomRightCorner(n, n) = -kappa * d4;
  return out;
}

MatrixXd tension_matrix(const GeometryCache& g) {
  const int n = static_cast<int>(g.jacobian.size());
  MatrixXd ds = arclength_diff_matrix(g, 1);
  MatrixXd out(2 * n, n);
  out.topRows(n) = ds * g.tangent.row(0).transpose().asDiagonal();
  out.bottomRows(n) = ds * g.tangent.row(1).transpose().asDiagonal();
  return out;
}

MatrixXd surface_divergence_matrix(const GeometryCache& g) {
  const int n = static_cast<int>(g.jacobian.size());
  MatrixXd ds = arclength_diff_matrix(g, 1);
  MatrixXd out(n, 2 * n);
  out.leftCols(n) = g.tangent.row(0).transpose().asDiagonal() * ds;
  out.rightCols(n) = g.tangent.row(1).transpose().asDiagonal() * ds;
  return out;
}

Matrix2Xd traction_jump(const Vesicle& v) {
  Matrix2Xd x4 = arclength_derivative(v.geom, v.curve.x, 4);
  Matrix2Xd st(2, v.n());
  st.row(0) = v.sigma.transpose().array() * v.geom.tangent.row(0).array();
  st.row(1) = v.sigma.transpose().array() * v.geom.tangent.row(1).array();
  return -v.kappa * x4 + arclength_derivative(v.geom, st, 1);
}

Vector2d density_force_moment(const WallComponent& w, const Matrix2Xd& eta) {
  Vector2d acc = Vector2d::Zero();
  for (int j = 0; j < w.n(); ++j) acc += eta.col(j) * w.geom.ds[j];
  return acc / kTwoPi;
}

double density_torque_moment(const WallComponent& w, const Matrix2Xd& eta) {
  double acc = 0.0;
  for (int j = 0; j < w.n(); ++j) {
    Vector2d r = w.curve.x.col(j) - w.center;
    acc += (r[1] * eta(0, j) - r[0] * eta(1, j)) * w.geom.ds[j];
  }
  return acc / kTwoPi;
}

VectorXd stack_xy(const Matrix2Xd& f) {
  const int n = static_cast<int>(f.cols());
  VectorXd v(2 * n);
  v.head(n) = f.row(0).transpose();
  v.tail(n) = f.row(1).transpose();
  return v;
}

Matrix2Xd unstack_xy(const VectorXd& v) {
  const int n = static_cast<int>(v.size()) / 2;
  Matrix2Xd f(2, n);
  f.row(0) = v.head(n).transpose();
  f.row(1) = v.tail(n).transpose();
  return f;
}

}  // namespace vesflow
