#include "doctest.h"
#include "vesflow/nearsing.hpp"

#include <cmath>

using namespace vesflow;

TEST_CASE("mesh spacing uses the largest jacobian") {
  GeometryCache gc = compute_geometry(make_circle(64));
  CHECK(mesh_spacing(gc) == doctest::Approx(2.0 * M_PI / 64).epsilon(1e-13));
  GeometryCache ge = compute_geometry(make_ellipse(64, 2.0, 1.0));
  CHECK(mesh_spacing(ge) ==
        doctest::Approx(2.0 * 2.0 * M_PI / 64).epsilon(1e-10));
}

TEST_CASE("closest point on a circle is along the radius") {
  Vector2d c0(0.4, -1.0);
  Curve c = make_circle(64, 2.0, c0);
  CurveInterp ci(c);
  Vector2d offset(1.7, 0.3);
  Vector2d p = c0 + offset;
  ClosestPoint cp = closest_point(ci, c, p);
  Vector2d ref = c0 + 2.0 * offset / offset.norm();
  CHECK((cp.x0 - ref).norm() < 1e-10);
  CHECK(cp.dist == doctest::Approx(2.0 - offset.norm()).epsilon(1e-10));
}

TEST_CASE("closest point stationarity on an ellipse") {
  Curve c = make_ellipse(128, 2.0, 0.8);
  CurveInterp ci(c);
  for (Vector2d p : {Vector2d(1.9, 0.4), Vector2d(0.3, 0.9),
                     Vector2d(-1.2, -0.75)}) {
    ClosestPoint cp = closest_point(ci, c, p);
    // residual of the normal equation and no node beats the minimum
    Vector2d r = cp.x0 - p;
    CHECK(std::abs(r.dot(ci.derivative(cp.alpha))) < 1e-9);
    for (int j = 0; j < c.n(); ++j)
      CHECK((c.x.col(j) - p).norm() >= cp.dist - 1e-12);
  }
}

TEST_CASE("zone classification splits at one mesh spacing") {
  Curve c = make_circle(32);
  GeometryCache g = compute_geometry(c);
  CurveInterp ci(c);
  const double h = mesh_spacing(g);  // 2 pi / 32
  Matrix2Xd targets(2, 4);
  targets.col(0) = Vector2d(1.0 + 0.5 * h, 0.0);   // near, outside
  targets.col(1) = Vector2d(0.0, 1.0 + 2.0 * h);   // far
  targets.col(2) = Vector2d(-(1.0 - 0.5 * h), 0.0);  // near, inside
  targets.col(3) = Vector2d(0.25, 0.0);            // deep inside, far
  ZoneMap zm = classify_targets(c, g, ci, targets);
  CHECK(zm.h == doctest::Approx(h));
  CHECK(zm.near[0] == 1);
  CHECK(zm.near[1] == 0);
  CHECK(zm.near[2] == 1);
  CHECK(zm.near[3] == 0);
  REQUIRE(zm.records.size() == 2);
  CHECK(zm.records[0].side == 1.0);
  CHECK(zm.records[1].side == -1.0);
  CHECK(std::abs(zm.records[0].dist - 0.5 * h) < 1e-10);
  CHECK((zm.records[1].x0 - Vector2d(-1.0, 0.0)).norm() < 1e-10);
}

namespace {
Matrix2Xd smooth_density(int n) {
  Matrix2Xd f(2, n);
  for (int j = 0; j < n; ++j) {
    double a = 2.0 * M_PI * j / n;
    f.col(j) = Vector2d(std::cos(a) + 0.3, std::sin(2.0 * a));
  }
  return f;
}
}  // namespace

TEST_CASE("near-zone single layer matches a refined far evaluation") {
  // target at half a mesh spacing from a unit circle
  LayerSpec spec;
  spec.kind = LayerKind::StokesSLP;
  double prev_err = 1.0;
  for (int n : {32, 64, 128}) {
    double h = 2.0 * M_PI / n;
    Matrix2Xd target(2, 1);
    target.col(0) = Vector2d(1.0 + 0.5 * h, 0.0);
    Matrix2Xd got =
        near_eval_stokes(make_circle(n), spec, smooth_density(n), target);
    // reference: same target is far for n = 512
    Matrix2Xd ref =
        near_eval_stokes(make_circle(512), spec, smooth_density(512), target);
    double err = (got.col(0) - ref.col(0)).norm();
    CHECK(err < 0.5 * prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 1e-6);
}

TEST_CASE("near-zone double layer reproduces one-sided limits") {
  // constant density: interior limit -(1-nu) c, exterior limit 0
  const double nu = 0.0;
  Curve c = make_ellipse(64, 1.5, 0.9);
  GeometryCache g = compute_geometry(c);
  double h = mesh_spacing(g);
  Matrix2Xd density(2, 64);
  density.row(0).setConstant(0.7);
  density.row(1).setConstant(-0.4);
  LayerSpec spec;
  spec.kind = LayerKind::StokesDLP;
  spec.nu = nu;
  Matrix2Xd targets(2, 2);
  targets.col(0) = Vector2d(1.5 + 0.05 * h, 0.0);      // just outside
  targets.col(1) = Vector2d(0.0, -(0.9 - 0.05 * h));   // just inside
  Matrix2Xd v = near_eval_stokes(c, spec, density, targets);
  CHECK(v.col(0).norm() < 1e-6);
  CHECK((v.col(1) - Vector2d(-0.7, 0.4)).norm() < 1e-6);
}

TEST_CASE("near-zone indicator reproduces one-sided limits") {
  Curve c = make_ellipse(64, 1.2, 0.8, Vector2d(0.3, 0.3), 0.4);
  GeometryCache g = compute_geometry(c);
  double h = mesh_spacing(g);
  VectorXd ones = VectorXd::Ones(64);
  CurveInterp ci(c);
  // walk two points along the normal of node 5, inside and outside
  Vector2d p = c.x.col(5), n5 = g.normal.col(5);
  Matrix2Xd targets(2, 2);
  targets.col(0) = p + 0.1 * h * n5;
  targets.col(1) = p - 0.1 * h * n5;
  VectorXd v = near_eval_laplace(c, 1.0, ones, targets);
  CHECK(std::abs(v[0]) < 1e-6);
  CHECK(std::abs(v[1] - 1.0) < 1e-6);
}

TEST_CASE("potential is continuous across the zone boundary") {
  Curve c = make_circle(64);
  LayerSpec spec;
  spec.kind = LayerKind::StokesSLP;
  double h = 2.0 * M_PI / 64;
  Matrix2Xd targets(2, 2);
  targets.col(0) = Vector2d(1.0 + 0.999 * h, 0.0);
  targets.col(1) = Vector2d(1.0 + 1.001 * h, 0.0);
  Matrix2Xd v = near_eval_stokes(c, spec, smooth_density(64), targets);
  // both sides agree to the near-interpolation accuracy at this resolution
  CHECK((v.col(0) - v.col(1)).norm() < 5e-5);
}

TEST_CASE("wall stencils may not cross the wall") {
  // coarse circular wall: the inward stencil from a deep interior target
  // pokes out through the opposite side
  Curve wall = make_circle(16);
  GeometryCache g = compute_geometry(wall);
  CurveInterp ci(wall);
  UpsampledSource up(wall, upsample_size(16));
  Matrix2Xd target(2, 1);
  target.col(0) = Vector2d(0.95, 0.0);
  ZoneMap zm = classify_targets(wall, g, ci, target);
  REQUIRE(zm.near[0] == 1);
  LayerSpec spec;
  spec.kind = LayerKind::StokesDLP;
  std::vector<const Curve*> walls = {&wall};
  CHECK_THROWS_AS(near_eval_matrix(up, spec, target, zm, {}, &walls),
                  StencilCrossesWall);

  // a finer wall keeps the stencil on one side
  Curve fine = make_circle(128);
  GeometryCache gf = compute_geometry(fine);
  CurveInterp cif(fine);
  UpsampledSource upf(fine, upsample_size(128));
  Matrix2Xd t2(2, 1);
  t2.col(0) = Vector2d(0.97, 0.0);
  ZoneMap zf = classify_targets(fine, gf, cif, t2);
  REQUIRE(zf.near[0] == 1);
  std::vector<const Curve*> walls2 = {&fine};
  CHECK_NOTHROW(near_eval_matrix(upf, spec, t2, zf, {}, &walls2));
}

TEST_CASE("far targets use the upsampled smooth rule") {
  Curve c = make_ellipse(32, 1.0, 0.6);
  GeometryCache g = compute_geometry(c);
  CurveInterp ci(c);
  UpsampledSource up(c, upsample_size(32));
  Matrix2Xd target(2, 1);
  target.col(0) = Vector2d(2.5, 0.4);
  ZoneMap zm = classify_targets(c, g, ci, target);
  CHECK(zm.near[0] == 0);
  LayerSpec spec;
  spec.kind = LayerKind::StokesSLP;
  MatrixXd m = near_eval_matrix(up, spec, target, zm);
  VectorXd v = m * stack_xy(resample(smooth_density(32), up.n()));
  // reference: direct trapezoid on a much finer grid of the same shape
  Curve cf = make_ellipse(2048, 1.0, 0.6);
  GeometryCache gf = compute_geometry(cf);
  VectorXd vf =
      stokes_slp_matrix(cf, gf, target, 1.0) *
      stack_xy(resample(smooth_density(32), 2048));
  CHECK((v - vf).norm() < 1e-11);
}
