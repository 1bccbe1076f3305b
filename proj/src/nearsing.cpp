#include "vesflow/nearsing.hpp"

#include <cmath>

namespace vesflow {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double wrap_to(double alpha, double center) {
  while (alpha - center > M_PI) alpha -= kTwoPi;
  while (alpha - center < -M_PI) alpha += kTwoPi;
  return alpha;
}

// Lagrange weights for nodes at `pos` evaluated at t.
VectorXd lagrange_weights(const VectorXd& pos, double t) {
  const int m = static_cast<int>(pos.size());
  VectorXd w(m);
  for (int i = 0; i < m; ++i) {
    double acc = 1.0;
    for (int j = 0; j < m; ++j)
      if (j != i) acc *= (t - pos[j]) / (pos[i] - pos[j]);
    w[i] = acc;
  }
  return w;
}

Vector2d normal_at(const CurveInterp& ci, double alpha, double normal_sign) {
  Vector2d d = ci.derivative(alpha);
  Vector2d t = d / d.norm();
  return normal_sign * Vector2d(t[1], -t[0]);
}
}  // namespace

double mesh_spacing(const GeometryCache& g) {
  const int n = static_cast<int>(g.jacobian.size());
  return (kTwoPi / n) * g.jacobian.maxCoeff();
}

ClosestPoint closest_point(const CurveInterp& ci, const Curve& c,
                           const Vector2d& p, std::optional<double> seed) {
  double alpha;
  if (seed) {
    alpha = *seed;
  } else {
    int best = 0;
    double bd = (c.x.col(0) - p).squaredNorm();
    for (int j = 1; j < c.n(); ++j) {
      double d = (c.x.col(j) - p).squaredNorm();
      if (d < bd) { bd = d; best = j; }
    }
    alpha = kTwoPi * best / c.n();
  }
  // Newton on g(a) = |x(a) - p|^2; two steps suffice near the curve but we
  // allow a few more with an early exit for elongated shapes.
  for (int it = 0; it < 5; ++it) {
    Vector2d x = ci.position(alpha), d1 = ci.derivative(alpha, 1),
             d2 = ci.derivative(alpha, 2);
    Vector2d r = x - p;
    double g1 = 2.0 * r.dot(d1);
    double g2 = 2.0 * (d1.dot(d1) + r.dot(d2));
    if (g2 <= 0.0) break;  // not a local minimum basin; keep the seed
    double step = g1 / g2;
    alpha -= step;
    if (std::abs(step) < 1e-14) break;
  }
  ClosestPoint cp;
  cp.alpha = alpha;
  cp.x0 = ci.position(alpha);
  cp.dist = (cp.x0 - p).norm();
  return cp;
}

ZoneMap classify_targets(const Curve& c, const GeometryCache& g,
                         const CurveInterp& ci, const Matrix2Xd& targets,
                         double normal_sign) {
  ZoneMap zm;
  zm.h = mesh_spacing(g);
  const int t = static_cast<int>(targets.cols());
  zm.near.assign(t, 0);
  for (int i = 0; i < t; ++i) {
    double bd = (c.x.col(0) - targets.col(i)).squaredNorm();
    for (int j = 1; j < c.n(); ++j)
      bd = std::min(bd, (c.x.col(j) - targets.col(i)).squaredNorm());
    if (std::sqrt(bd) >= 2.0 * zm.h) continue;  // cheap prefilter
    ClosestPoint cp = closest_point(ci, c, targets.col(i));
    if (cp.dist >= zm.h) continue;
    NearTarget rec;
    rec.index = i;
    rec.alpha0 = cp.alpha;
    rec.x0 = cp.x0;
    rec.dist = cp.dist;
    Vector2d n0 = normal_at(ci, cp.alpha, normal_sign);
    double s = (targets.col(i) - cp.x0).dot(n0);
    rec.side = (cp.dist < 1e-13 || s == 0.0) ? 1.0 : (s > 0.0 ? 1.0 : -1.0);
    zm.near[i] = 1;
    zm.records.push_back(rec);
  }
  return zm;
}

UpsampledSource::UpsampledSource(const Curve& native, int n_up)
    : interp(native), n_native(native.n()) {
  curve = Curve(resample(native.x, n_up));
  geom = compute_geometry(curve);
}

namespace {

// One trapezoid row over the upsampled source at an off-curve point.
// Stokes rows fill 2 x 2n, indicator rows 1 x n.
MatrixXd trapezoid_row(const UpsampledSource& src, const LayerSpec& spec,
                       const Vector2d& p) {
  const int n = src.n();
  const Curve& c = src.curve;
  const GeometryCache& g = src.geom;
  if (spec.kind == LayerKind::LaplaceDLP) {
    MatrixXd out(1, n);
    for (int j = 0; j < n; ++j)
      out(0, j) = spec.normal_sign *
                  laplace_dlp_kernel(p, c.x.col(j), g.normal.col(j)) *
                  g.ds[j];
    return out;
  }
  MatrixXd out(2, 2 * n);
  for (int j = 0; j < n; ++j) {
    Matrix2d k;
    if (spec.kind == LayerKind::StokesSLP)
      k = stokes_slp_kernel(p, c.x.col(j), spec.mu0);
    else
      k = spec.normal_sign *
          stokes_dlp_kernel(p, c.x.col(j), g.normal.col(j), spec.nu);
    k *= g.ds[j];
    out(0, j) = k(0, 0);
    out(0, n + j) = k(0, 1);
    out(1, j) = k(1, 0);
    out(1, n + j) = k(1, 1);
  }
  return out;
}

// Principal-value row at upsampled node i.
MatrixXd pv_row(const UpsampledSource& src, const LayerSpec& spec, int i) {
  switch (spec.kind) {
    case LayerKind::StokesSLP:
      return stokes_slp_self_row(src.curve, src.geom, i, spec.mu0);
    case LayerKind::StokesDLP:
      return stokes_dlp_self_row(src.curve, src.geom, i, spec.nu,
                                 spec.normal_sign);
    default:
      return laplace_dlp_self_row(src.curve, src.geom, i, spec.normal_sign)
          .transpose();
  }
}

double jump_coefficient(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::StokesSLP: return 0.0;
    case LayerKind::StokesDLP: return 0.5 * (1.0 - spec.nu);
    default: return -0.5;
  }
}

void check_stencil(const std::vector<const Curve*>& walls,
                   const UpsampledSource& src, const NearTarget& rec,
                   const Matrix2Xd& pts, double normal_sign) {
  // The interpolated potential jumps across the source wall; every stencil
  // point must stay on the target's side.
  CurveInterp ci = src.interp;
  (void)walls;
  for (int k = 0; k < pts.cols(); ++k) {
    ClosestPoint cp = closest_point(ci, src.curve, pts.col(k));
    Vector2d n0 = normal_at(ci, cp.alpha, normal_sign);
    double s = (pts.col(k) - cp.x0).dot(n0);
    if (s * rec.side < 0.0)
      throw StencilCrossesWall(
          "near-zone interpolation stencil crosses a wall component; "
          "increase the wall resolution");
  }
}

}  // namespace

MatrixXd near_eval_matrix(const UpsampledSource& src, const LayerSpec& spec,
                          const Matrix2Xd& targets, const ZoneMap& zones,
                          const NearParams& params,
                          const std::vector<const Curve*>* walls) {
  const int t = static_cast<int>(targets.cols());
  const int n = src.n();
  const bool scalar = spec.kind == LayerKind::LaplaceDLP;
  const int rows = scalar ? t : 2 * t;
  const int cols = scalar ? n : 2 * n;
  MatrixXd out = MatrixXd::Zero(rows, cols);

  auto put_row = [&](int i, const MatrixXd& r) {
    if (scalar) {
      out.row(i) = r.row(0);
    } else {
      out.row(i) = r.row(0);
      out.row(t + i) = r.row(1);
    }
  };

  std::vector<const NearTarget*> rec_of(t, nullptr);
  for (const NearTarget& r : zones.records) rec_of[r.index] = &r;

  for (int i = 0; i < t; ++i) {
    if (!zones.near[i]) {
      put_row(i, trapezoid_row(src, spec, targets.col(i)));
      continue;
    }
    const NearTarget& rec = *rec_of[i];
    const double h = zones.h;
    const int m = params.stencil_points;
    const int L = params.lagrange_points;
    const double da = kTwoPi / n;

    // stencil marching away from the curve along the closest-point ray
    Vector2d dir;
    if (rec.dist < 1e-13)
      dir = normal_at(src.interp, rec.alpha0, spec.normal_sign) * rec.side;
    else
      dir = (targets.col(i) - rec.x0) / rec.dist;
    Matrix2Xd pts(2, m);
    for (int k = 1; k <= m; ++k)
      pts.col(k - 1) = rec.x0 + (params.spacing_factor * h * k) * dir;
    if (walls) check_stencil(*walls, src, rec, pts, spec.normal_sign);

    // on-curve one-sided value: Lagrange over L upsampled nodes around
    // alpha0 of (pv rows) plus the density jump at alpha0
    int k0 = static_cast<int>(std::floor(rec.alpha0 / da)) - (L - 1) / 2;
    VectorXd pos(L);
    for (int k = 0; k < L; ++k) pos[k] = (k0 + k) * da;
    VectorXd wl = lagrange_weights(pos, wrap_to(rec.alpha0, pos.mean()));
    MatrixXd on_row = MatrixXd::Zero(scalar ? 1 : 2, cols);
    for (int k = 0; k < L; ++k) {
      int idx = ((k0 + k) % n + n) % n;
      on_row += wl[k] * pv_row(src, spec, idx);
    }
    double jc = jump_coefficient(spec) * rec.side;
    if (jc != 0.0) {
      for (int k = 0; k < L; ++k) {
        int idx = ((k0 + k) % n + n) % n;
        if (scalar) {
          on_row(0, idx) += jc * wl[k];
        } else {
          on_row(0, idx) += jc * wl[k];
          on_row(1, n + idx) += jc * wl[k];
        }
      }
    }

    // 1D interpolation along the ray through the stencil values
    VectorXd dist_pos(m + 1);
    dist_pos[0] = 0.0;
    for (int k = 1; k <= m; ++k) dist_pos[k] = params.spacing_factor * h * k;
    VectorXd wd = lagrange_weights(dist_pos, rec.dist);
    MatrixXd row = wd[0] * on_row;
    for (int k = 1; k <= m; ++k)
      row += wd[k] * trapezoid_row(src, spec, pts.col(k - 1));
    put_row(i, row);
  }
  return out;
}

Matrix2Xd near_eval_stokes(const Curve& src, const LayerSpec& spec,
                           const Matrix2Xd& density, const Matrix2Xd& targets,
                           const NearParams& params) {
  UpsampledSource up(src, upsample_size(src.n()));
  GeometryCache g = compute_geometry(src);
  ZoneMap zm = classify_targets(src, g, up.interp, targets, spec.normal_sign);
  MatrixXd m = near_eval_matrix(up, spec, targets, zm, params);
  Matrix2Xd dup = resample(density, up.n());
  return unstack_xy(m * stack_xy(dup));
}

VectorXd near_eval_laplace(const Curve& src, double normal_sign,
                           const VectorXd& density, const Matrix2Xd& targets,
                           const NearParams& params) {
  UpsampledSource up(src, upsample_size(src.n()));
  GeometryCache g = compute_geometry(src);
  ZoneMap zm = classify_targets(src, g, up.interp, targets, normal_sign);
  LayerSpec spec;
  spec.kind = LayerKind::LaplaceDLP;
  spec.normal_sign = normal_sign;
  MatrixXd m = near_eval_matrix(up, spec, targets, zm, params);
  return m * resample(density, up.n());
}

}  // namespace vesflow
