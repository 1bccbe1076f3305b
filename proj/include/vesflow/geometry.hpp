#pragma once

#include <string>

#include "vesflow/spectral.hpp"

// Closed-curve geometry on equispaced parameter grids. Curves are stored
// counterclockwise; the outward normal is the clockwise rotation of the
// unit tangent, so enclosed areas come out positive.

namespace vesflow {

struct Curve {
  Matrix2Xd x;  // column j = node j at alpha_j = 2*pi*j/n

  Curve() = default;
  explicit Curve(Matrix2Xd nodes);
  int n() const { return static_cast<int>(x.cols()); }
};

struct GeometryCache {
  Matrix2Xd tangent;   // unit tangent x_s
  Matrix2Xd normal;    // outward unit normal (t_y, -t_x)
  VectorXd jacobian;   // |x_alpha|
  VectorXd curvature;  // signed curvature, 1/r for a ccw circle of radius r
  VectorXd ds;         // trapezoid arclength weights jacobian * 2*pi/n
  double length = 0.0;
  double area = 0.0;
  Vector2d centroid = Vector2d::Zero();  // centroid of the enclosed region
};

// Spectral differentiation of the nodes; throws if the jacobian vanishes
// (degenerate parametrization).
GeometryCache compute_geometry(const Curve& c);

// 4*pi*A / L^2; equals 1 exactly for a circle.
double reduced_area(const GeometryCache& g);

// d^order/ds^order of a periodic field on the curve, by repeated
// application of (1/|x_alpha|) d/dalpha.
VectorXd arclength_derivative(const GeometryCache& g, const VectorXd& f,
                              int order);
Matrix2Xd arclength_derivative(const GeometryCache& g, const Matrix2Xd& f,
                               int order);

// Dense matrix of arclength_derivative (n x n) for the given geometry.
MatrixXd arclength_diff_matrix(const GeometryCache& g, int order);

Curve make_circle(int n, double radius = 1.0,
                  const Vector2d& center = Vector2d::Zero());
Curve make_ellipse(int n, double a, double b,
                   const Vector2d& center = Vector2d::Zero(),
                   double angle = 0.0);

// Ellipse with the requested reduced area, perimeter 2*pi*scale, found by
// bisection on the axis ratio of the discrete shape. target in (0, 1].
Curve shape_with_reduced_area(double target, int n, double scale = 1.0,
                              const Vector2d& center = Vector2d::Zero(),
                              double angle = 0.0);

// CSV with header k,x,y; one row per node. Readers reject files whose row
// count is not a power of two.
void write_curve_csv(const std::string& path, const Curve& c);
Curve read_curve_csv(const std::string& path);

// Trigonometric interpolant of both coordinates; position/derivatives at
// arbitrary parameter values.
class CurveInterp {
 public:
  CurveInterp() = default;
  explicit CurveInterp(const Curve& c)
      : ix_(VectorXd(c.x.row(0).transpose())),
        iy_(VectorXd(c.x.row(1).transpose())) {}
  Vector2d position(double alpha) const { return {ix_(alpha), iy_(alpha)}; }
  Vector2d derivative(double alpha, int order = 1) const {
    return {ix_(alpha, order), iy_(alpha, order)};
  }

 private:
  TrigInterp ix_, iy_;
};

}  // namespace vesflow
