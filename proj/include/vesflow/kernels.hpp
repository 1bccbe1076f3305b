#pragma once

#include <vector>

#include "vesflow/geometry.hpp"

// Point kernels of the Stokes and Laplace layer potentials plus the
// membrane differential operators. Conventions, with r = x - y and
// rho = |r|:
//   single layer   G(x,y)   = 1/(4 pi mu0) * (-log(rho) I + r r^T / rho^2)
//   double layer   D(x,y)   = (1-nu)/pi * (r.n(y)/rho^2) * (r r^T / rho^2)
//   indicator      L(x,y)   = -1/(2 pi) * (r.n(y)/rho^2)
// D applied to a constant over a closed curve gives -(1-nu)*c inside,
// -(1-nu)*c/2 on the curve (principal value), 0 outside; L gives the
// winding indicator 1 / 1/2 / 0.

namespace vesflow {

using Eigen::Matrix2d;

Matrix2d stokes_slp_kernel(const Vector2d& x, const Vector2d& y, double mu0);
Matrix2d stokes_dlp_kernel(const Vector2d& x, const Vector2d& y,
                           const Vector2d& ny, double nu);
double laplace_dlp_kernel(const Vector2d& x, const Vector2d& y,
                          const Vector2d& ny);

// Velocity at x of a point force lambda and a point torque xi placed at c:
//   S(x) = 1/(4 pi mu0) * (-log(rho) I + r r^T / rho^2) lambda
//   R(x) = xi / mu0 * r_perp / rho^2,  r = x - c, r_perp = (r_y, -r_x)
Vector2d stokeslet(const Vector2d& x, const Vector2d& c,
                   const Vector2d& lambda, double mu0);
Vector2d rotlet(const Vector2d& x, const Vector2d& c, double xi, double mu0);

// 2T x 3 matrix mapping (lambda_x, lambda_y, xi) at center c to velocities
// at the targets (x components stacked over y components).
MatrixXd stokeslet_rotlet_matrix(const Matrix2Xd& targets, const Vector2d& c,
                                 double mu0);

struct Vesicle {
  Curve curve;
  GeometryCache geom;
  VectorXd sigma;       // tension
  double nu = 1.0;      // interior/exterior viscosity ratio
  double kappa = 0.1;   // bending modulus

  Vesicle() = default;
  Vesicle(Curve c, double nu_ = 1.0, double kappa_ = 0.1);
  int n() const { return curve.n(); }
};

// One closed wall component. All components are stored counterclockwise;
// `outer` marks the enclosing boundary. The double-layer density on an
// inner component uses the negated normal so that the domain-outward
// orientation is uniform, and carries a Stokeslet/rotlet completion at its
// centroid.
struct WallComponent {
  Curve curve;
  GeometryCache geom;
  Matrix2Xd velocity;  // prescribed boundary velocity at the nodes
  bool outer = false;
  Vector2d center = Vector2d::Zero();

  WallComponent() = default;
  WallComponent(Curve c, bool outer_);
  int n() const { return curve.n(); }
  double normal_sign() const { return outer ? 1.0 : -1.0; }
};

struct WallSet {
  std::vector<WallComponent> comps;  // comps[0] is the outer boundary

  bool empty() const { return comps.empty(); }
  int holes() const {
    return comps.empty() ? 0 : static_cast<int>(comps.size()) - 1;
  }
};

// Membrane operators as dense matrices acting on stacked vectors
// (x components then y components; tension is a plain n-vector).
//   bending:  f_b = -kappa * d^4 x / ds^4            (2n x 2n)
//   tension:  f_s = d(sigma x_s)/ds                  (2n x n)
//   surface divergence: div u = x_s . du/ds          (n x 2n)
MatrixXd bending_matrix(const GeometryCache& g, double kappa);
MatrixXd tension_matrix(const GeometryCache& g);
MatrixXd surface_divergence_matrix(const GeometryCache& g);

// Traction jump f = -kappa x_ssss + (sigma x_s)_s for the current shape
// and tension.
Matrix2Xd traction_jump(const Vesicle& v);

// Net force and torque moments of a wall density:
//   lambda = 1/(2 pi) * integral of eta ds
//   xi     = 1/(2 pi) * integral of (y - c)_perp . eta ds
Vector2d density_force_moment(const WallComponent& w, const Matrix2Xd& eta);
double density_torque_moment(const WallComponent& w, const Matrix2Xd& eta);

// Background velocity gradient correction has no role here; helpers to
// flatten/unflatten stacked component vectors.
VectorXd stack_xy(const Matrix2Xd& f);
Matrix2Xd unstack_xy(const VectorXd& v);

}  // namespace vesflow
