#include "vesflow/geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace vesflow {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Curve::Curve(Matrix2Xd nodes) : x(std::move(nodes)) {
  require_pow2(n(), "curve node count");
}

GeometryCache compute_geometry(const Curve& c) {
  const int n = c.n();
  require_pow2(n, "curve node count");
  GeometryCache g;
  VectorXd xa = fourier_derivative(c.x.row(0).transpose(), 1);
  VectorXd ya = fourier_derivative(c.x.row(1).transpose(), 1);
  VectorXd xaa = fourier_derivative(c.x.row(0).transpose(), 2);
  VectorXd yaa = fourier_derivative(c.x.row(1).transpose(), 2);
  g.jacobian = (xa.array().square() + ya.array().square()).sqrt();
  if (g.jacobian.minCoeff() < 1e-12)
    throw std::invalid_argument("degenerate curve: vanishing jacobian");
  g.tangent.resize(2, n);
  g.tangent.row(0) = (xa.array() / g.jacobian.array()).transpose();
  g.tangent.row(1) = (ya.array() / g.jacobian.array()).transpose();
  g.normal.resize(2, n);
  g.normal.row(0) = g.tangent.row(1);
  g.normal.row(1) = -g.tangent.row(0);
  g.curvature = (xa.array() * yaa.array() - ya.array() * xaa.array()) /
                g.jacobian.array().cube();
  g.ds = g.jacobian * (kTwoPi / n);
  g.length = g.ds.sum();
  // divergence theorem: A = 1/2 * contour integral of x . n ds
  double area = 0.0, cx = 0.0, cy = 0.0;
  for (int j = 0; j < n; ++j) {
    area += 0.5 * c.x.col(j).dot(g.normal.col(j)) * g.ds[j];
    cx += 0.5 * c.x(0, j) * c.x(0, j) * g.normal(0, j) * g.ds[j];
    cy += 0.5 * c.x(1, j) * c.x(1, j) * g.normal(1, j) * g.ds[j];
  }
  g.area = area;
  g.centroid = Vector2d(cx / area, cy / area);
  return g;
}

double reduced_area(const GeometryCache& g) {
  return 4.0 * M_PI * g.area / (g.length * g.length);
}

VectorXd arclength_derivative(const GeometryCache& g, const VectorXd& f,
                              int order) {
  VectorXd out = f;
  for (int k = 0; k < order; ++k)
    out = (fourier_derivative(out, 1).array() / g.jacobian.array()).matrix();
  return out;
}

Matrix2Xd arclength_derivative(const GeometryCache& g, const Matrix2Xd& f,
                               int order) {
  Matrix2Xd out(2, f.cols());
  out.row(0) =
      arclength_derivative(g, VectorXd(f.row(0).transpose()), order).transpose();
  out.row(1) =
      arclength_derivative(g, VectorXd(f.row(1).transpose()), order).transpose();
  return out;
}

MatrixXd arclength_diff_matrix(const GeometryCache& g, int order) {
  const int n = static_cast<int>(g.jacobian.size());
  MatrixXd ds = g.jacobian.array().inverse().matrix().asDiagonal() *
                fourier_diff_matrix(n, 1);
  MatrixXd out = MatrixXd::Identity(n, n);
  for (int k = 0; k < order; ++k) out = ds * out;
  return out;
}

Curve make_circle(int n, double radius, const Vector2d& center) {
  return make_ellipse(n, radius, radius, center);
}

Curve make_ellipse(int n, double a, double b, const Vector2d& center,
                   double angle) {
  require_pow2(n, "curve node count");
  Matrix2Xd x(2, n);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (int j = 0; j < n; ++j) {
    double t = kTwoPi * j / n;
    double px = a * std::cos(t), py = b * std::sin(t);
    x(0, j) = center[0] + ca * px - sa * py;
    x(1, j) = center[1] + sa * px + ca * py;
  }
  return Curve(std::move(x));
}

Curve shape_with_reduced_area(double target, int n, double scale,
                              const Vector2d& center, double angle) {
  if (!(target > 0.0 && target <= 1.0))
    throw std::invalid_argument("reduced area target must lie in (0, 1]");
  require_pow2(n, "curve node count");
  auto discrete_ra = [&](double ratio) {
    GeometryCache g = compute_geometry(make_ellipse(n, 1.0, ratio));
    return reduced_area(g);
  };
  double lo = 1e-4, hi = 1.0, ratio = 1.0;
  if (discrete_ra(lo) > target) {
    ratio = lo;
  } else {
    for (int it = 0; it < 200; ++it) {
      ratio = 0.5 * (lo + hi);
      if (hi - lo < 1e-14) break;
      (discrete_ra(ratio) < target) ? lo = ratio : hi = ratio;
    }
  }
  Curve base = make_ellipse(n, 1.0, ratio);
  double len = compute_geometry(base).length;
  double s = kTwoPi * scale / len;
  return make_ellipse(n, s, s * ratio, center, angle);
}

void write_curve_csv(const std::string& path, const Curve& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "k,x,y\n";
  char buf[80];
  for (int j = 0; j < c.n(); ++j) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", j, c.x(0, j),
                  c.x(1, j));
    out << buf;
  }
}

Curve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("k,x,y", 0) != 0)
    throw std::runtime_error(path + ": expected header k,x,y");
  std::vector<Vector2d> pts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    double v[3];
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(ss, tok, ',') || tok.empty())
        throw std::runtime_error(path + ": malformed row '" + line + "'");
      v[i] = std::stod(tok);
    }
    pts.emplace_back(v[1], v[2]);
  }
  const int n = static_cast<int>(pts.size());
  if (n < 4 || !is_pow2(n))
    throw std::runtime_error(path + ": node count " + std::to_string(n) +
                             " is not a power of two >= 4");
  Matrix2Xd x(2, n);
  for (int j = 0; j < n; ++j) x.col(j) = pts[j];
  return Curve(std::move(x));
}

}  // namespace vesflow
