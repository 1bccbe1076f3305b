#include "vesflow/scenarios.hpp"

#include <random>

namespace vesflow {

FlowKind parse_flow_kind(const std::string& name) {
  if (name == "relaxation") return FlowKind::Relaxation;
  if (name == "shear") return FlowKind::Shear;
  if (name == "extensional") return FlowKind::Extensional;
  if (name == "taylor_green") return FlowKind::TaylorGreen;
  if (name == "couette") return FlowKind::Couette;
  if (name == "stenosis") return FlowKind::Stenosis;
  throw std::invalid_argument("unknown scenario preset: " + name);
}

std::string flow_kind_name(FlowKind kind) {
  switch (kind) {
    case FlowKind::Relaxation: return "relaxation";
    case FlowKind::Shear: return "shear";
    case FlowKind::Extensional: return "extensional";
    case FlowKind::TaylorGreen: return "taylor_green";
    case FlowKind::Couette: return "couette";
    case FlowKind::Stenosis: return "stenosis";
  }
  throw std::logic_error("unreachable");
}

bool is_confined(FlowKind kind) {
  return kind == FlowKind::Couette || kind == FlowKind::Stenosis;
}

Matrix2Xd background_velocity(const ScenarioConfig& cfg, const Matrix2Xd& p) {
  if (is_confined(cfg.kind))
    throw std::invalid_argument(
        "confined preset drives the flow through the walls");
  Matrix2Xd u = Matrix2Xd::Zero(2, p.cols());
  switch (cfg.kind) {
    case FlowKind::Relaxation:
      break;
    case FlowKind::Shear:
      u.row(0) = p.row(1);
      break;
    case FlowKind::Extensional:
      u.row(0) = -p.row(0);
      u.row(1) = p.row(1);
      break;
    case FlowKind::TaylorGreen:
      u.row(0) = p.row(0).array().sin() * p.row(1).array().cos();
      u.row(1) = -(p.row(0).array().cos() * p.row(1).array().sin());
      break;
    default:
      break;
  }
  return cfg.flow_rate * u;
}

Vector2d stenosis_point(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const double r = std::pow(std::pow(c, 8) + std::pow(s, 8), -0.125);
  const double x = 10.0 * r * c;
  double eta = 1.0;
  if (std::abs(x) <= M_PI) eta = (1.0 - 0.6 * std::cos(x)) / 1.6;
  return {x, 3.0 * r * s * eta};
}

namespace {

Curve stenosis_wall(int n) {
  Matrix2Xd pts(2, n);
  for (int j = 0; j < n; ++j)
    pts.col(j) = stenosis_point(2.0 * M_PI * j / n);
  return Curve(pts);
}

// Gaussian plugs at the two rounded ends of the tube, both pointing in
// +x so the left cap is the intake and the right cap the outtake; the
// mirror symmetry balances the fluxes.
Matrix2Xd stenosis_velocity(const Curve& wall, double amplitude, double width) {
  Matrix2Xd u = Matrix2Xd::Zero(2, wall.n());
  const double inv2w2 = 1.0 / (2.0 * width * width);
  for (int j = 0; j < wall.n(); ++j) {
    const double x = wall.x(0, j), y = wall.x(1, j);
    const double caps = std::exp(-(x - 10.0) * (x - 10.0) * inv2w2) +
                        std::exp(-(x + 10.0) * (x + 10.0) * inv2w2);
    u(0, j) = amplitude * caps * std::exp(-y * y * inv2w2);
  }
  return u;
}

double constriction_opening() {
  // full channel height at x = 0: 2 * 3 * (1 - 0.6)/1.6
  return 2.0 * 3.0 * (1.0 - 0.6) / 1.6;
}

Vesicle place_vesicle(const ScenarioConfig& cfg, double scale,
                      const Vector2d& center, double angle) {
  Curve c = shape_with_reduced_area(cfg.reduced_area, cfg.n, scale, center, angle);
  return Vesicle(std::move(c), cfg.nu, cfg.kappa);
}

double curve_height(const Curve& c) {
  return c.x.row(1).maxCoeff() - c.x.row(1).minCoeff();
}

double bounding_radius(const Curve& c, const Vector2d& center) {
  return (c.x.colwise() - center).colwise().norm().maxCoeff();
}

void validate_placement(const SystemState& state) {
  CollisionReport rep = detect_collisions(state);
  if (rep.collided)
    throw std::invalid_argument("scenario placement overlaps");
  double h = 0.0;
  for (const Vesicle& v : state.vesicles)
    h = std::max(h, mesh_spacing(v.geom));
  GapReport gaps = minimum_gaps(state);
  const double gap = std::min(gaps.vesicle, gaps.wall);
  if (state.vesicles.size() + state.walls.comps.size() > 1 && gap <= h)
    throw std::invalid_argument("scenario placement leaves a gap under h");
}

}  // namespace

WallSet wall_geometry(const ScenarioConfig& cfg) {
  if (!is_confined(cfg.kind))
    throw std::invalid_argument("preset has no walls");
  WallSet walls;
  if (cfg.kind == FlowKind::Couette) {
    const int nw = cfg.wall_n > 0 ? cfg.wall_n : 128;
    require_pow2(nw, "wall node count");
    walls.comps.emplace_back(make_circle(nw, cfg.couette_r_out), true);
    walls.comps.emplace_back(make_circle(nw, cfg.couette_r_in), false);
    const double omega = 2.0 * M_PI / cfg.couette_period;
    WallComponent& inner = walls.comps[1];
    for (int j = 0; j < inner.n(); ++j) {
      inner.velocity(0, j) = -omega * inner.curve.x(1, j);
      inner.velocity(1, j) = omega * inner.curve.x(0, j);
    }
  } else {
    const int nw = cfg.wall_n > 0 ? cfg.wall_n : 256;
    require_pow2(nw, "wall node count");
    if (nw < 256)
      throw std::invalid_argument(
          "stenosis wall needs at least 256 points: coarser meshes put "
          "near-zone stencils on both sides of the wall");
    walls.comps.emplace_back(stenosis_wall(nw), true);
    walls.comps[0].velocity =
        stenosis_velocity(walls.comps[0].curve, cfg.sten_amplitude, cfg.sten_width);
  }
  return walls;
}

Scenario build_scenario(const ScenarioConfig& cfg) {
  Scenario sc;
  sc.cfg = cfg;
  SystemState& s = sc.state;
  const double ra = cfg.reduced_area;
  require_pow2(cfg.n, "vesicle node count");

  switch (cfg.kind) {
    case FlowKind::Relaxation: {
      const int m = cfg.vesicles > 0 ? cfg.vesicles : 1;
      for (int i = 0; i < m; ++i)
        s.vesicles.push_back(place_vesicle(
            cfg, cfg.vesicle_scale,
            {3.0 * cfg.vesicle_scale * i, 0.0}, M_PI / 2));
      break;
    }
    case FlowKind::Shear: {
      s.vesicles.push_back(place_vesicle(
          cfg, cfg.vesicle_scale,
          {-cfg.shear_separation, cfg.shear_offset}, M_PI / 2));
      s.vesicles.push_back(place_vesicle(cfg, cfg.vesicle_scale, {0.0, 0.0}, M_PI / 2));
      break;
    }
    case FlowKind::Extensional: {
      s.vesicles.push_back(place_vesicle(
          cfg, cfg.vesicle_scale, {-cfg.ext_separation, 0.0}, M_PI / 2));
      s.vesicles.push_back(place_vesicle(
          cfg, cfg.vesicle_scale, {cfg.ext_separation, 0.0}, M_PI / 2));
      break;
    }
    case FlowKind::TaylorGreen: {
      // 3x3 arrangement in the cell (0, 2pi)^2. The flow contracts the y
      // direction at the hyperbolic point (pi, pi), so the middle column
      // carries a pair straddling it at the tightest admissible gap (the
      // vortices then drive the pair together); the outer columns sit on
      // their grid slots with fixed symmetry-breaking offsets.
      const double third = 2.0 * M_PI / 3.0;
      const double f = 0.5 * cfg.vesicle_scale;
      Curve proto = shape_with_reduced_area(ra, cfg.n, f, {0.0, 0.0}, M_PI / 2);
      GeometryCache pg = compute_geometry(proto);
      const double height =
          proto.x.row(1).maxCoeff() - proto.x.row(1).minCoeff();
      const double h = 2.0 * M_PI * pg.jacobian.maxCoeff() / cfg.n;
      const double gap = cfg.tg_gap > 0.0 ? cfg.tg_gap : 1.15 * h;
      const double ox[2][3] = {{0.08, -0.06, 0.05}, {-0.07, 0.06, -0.04}};
      const double oy[2][3] = {{0.06, -0.04, -0.08}, {-0.05, 0.07, 0.04}};
      for (int ii = 0; ii < 2; ++ii) {
        const int i = ii == 0 ? 0 : 2;
        for (int j = 0; j < 3; ++j) {
          Vector2d c((i + 0.5) * third + ox[ii][j],
                     (j + 0.5) * third + oy[ii][j]);
          s.vesicles.push_back(place_vesicle(cfg, f, c, M_PI / 2));
        }
      }
      const double dy = 0.5 * (height + gap);
      s.vesicles.push_back(
          place_vesicle(cfg, f, {M_PI - 0.03, M_PI - dy}, M_PI / 2));
      s.vesicles.push_back(
          place_vesicle(cfg, f, {M_PI + 0.03, M_PI + dy}, M_PI / 2));
      s.vesicles.push_back(place_vesicle(
          cfg, f, {M_PI + 0.05, M_PI - dy - height - gap - 0.15}, M_PI / 2));
      break;
    }
    case FlowKind::Couette: {
      s.walls = wall_geometry(cfg);
      const int m = cfg.vesicles > 0 ? cfg.vesicles : 8;
      std::mt19937_64 rng(cfg.seed);
      std::uniform_real_distribution<double> uang(0.0, 2.0 * M_PI);
      std::uniform_real_distribution<double> urad(0.0, 1.0);
      Curve proto = shape_with_reduced_area(ra, cfg.n, cfg.vesicle_scale);
      const double rv = bounding_radius(proto, Vector2d::Zero());
      const double lo = cfg.couette_r_in + 1.6 * rv;
      const double hi = cfg.couette_r_out - 1.6 * rv;
      std::vector<Vector2d> centers;
      int attempts = 0;
      while (static_cast<int>(centers.size()) < m) {
        if (++attempts > 100000)
          throw std::runtime_error("couette placement failed; fewer vesicles?");
        const double r = std::sqrt(lo * lo + (hi * hi - lo * lo) * urad(rng));
        const double a = uang(rng);
        Vector2d c(r * std::cos(a), r * std::sin(a));
        bool ok = true;
        for (const Vector2d& o : centers)
          ok = ok && (c - o).norm() > 2.6 * rv;
        if (ok) centers.push_back(c);
      }
      for (const Vector2d& c : centers)
        s.vesicles.push_back(place_vesicle(cfg, cfg.vesicle_scale, c, uang(rng)));
      break;
    }
    case FlowKind::Stenosis: {
      s.walls = wall_geometry(cfg);
      Curve proto = shape_with_reduced_area(ra, cfg.n, 1.0, {0.0, 0.0}, M_PI / 2);
      const double target = cfg.sten_height_factor * constriction_opening();
      const double scale = target / curve_height(proto);
      s.vesicles.push_back(place_vesicle(cfg, scale, {-5.0, 0.0}, M_PI / 2));
      break;
    }
  }

  if (!is_confined(cfg.kind) && cfg.kind != FlowKind::Relaxation) {
    ScenarioConfig copy = cfg;
    sc.flow = [copy](const Matrix2Xd& p) { return background_velocity(copy, p); };
  }
  validate_placement(s);
  return sc;
}

}  // namespace vesflow
