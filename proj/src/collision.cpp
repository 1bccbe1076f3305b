#include "vesflow/collision.hpp"

namespace vesflow {

std::vector<VectorXd> indicator_field(const SystemState& state) {
  const int m = static_cast<int>(state.vesicles.size());
  std::vector<VectorXd> field(m);
  for (int p = 0; p < m; ++p) {
    const Matrix2Xd& targets = state.vesicles[p].curve.x;
    VectorXd total = VectorXd::Constant(targets.cols(), 0.5);  // own curve PV
    for (int q = 0; q < m; ++q) {
      if (q == p) continue;
      const Curve& src = state.vesicles[q].curve;
      total += near_eval_laplace(src, 1.0, VectorXd::Ones(src.n()), targets);
    }
    for (const WallComponent& wc : state.walls.comps) {
      // Outward normals throughout: the outer component scores 1 on the
      // fluid side, holes score 1 only when penetrated.
      total += near_eval_laplace(wc.curve, 1.0, VectorXd::Ones(wc.curve.n()),
                                 targets, wall_near_params());
    }
    field[p] = total;
  }
  return field;
}

CollisionReport detect_collisions(const SystemState& state, double tol) {
  CollisionReport rep;
  bool confined = false;
  for (const WallComponent& wc : state.walls.comps) confined = confined || wc.outer;
  const double expected = 0.5 + (confined ? 1.0 : 0.0);
  std::vector<VectorXd> field = indicator_field(state);
  for (int p = 0; p < static_cast<int>(field.size()); ++p) {
    for (int i = 0; i < field[p].size(); ++i) {
      const double dev = std::abs(field[p][i] - expected);
      rep.max_deviation = std::max(rep.max_deviation, dev);
      if (dev > tol) {
        rep.events.push_back({p, static_cast<int>(i), field[p][i], expected});
      }
    }
  }
  rep.collided = !rep.events.empty();
  return rep;
}

GapReport minimum_gaps(const SystemState& state) {
  GapReport gaps;
  const int m = static_cast<int>(state.vesicles.size());
  std::vector<CurveInterp> ves_interp;
  ves_interp.reserve(m);
  for (const Vesicle& v : state.vesicles) ves_interp.emplace_back(v.curve);
  std::vector<CurveInterp> wall_interp;
  wall_interp.reserve(state.walls.comps.size());
  for (const WallComponent& wc : state.walls.comps) wall_interp.emplace_back(wc.curve);

  for (int p = 0; p < m; ++p) {
    const Matrix2Xd& pts = state.vesicles[p].curve.x;
    for (int q = 0; q < m; ++q) {
      if (q == p) continue;
      for (int i = 0; i < pts.cols(); ++i) {
        ClosestPoint cp =
            closest_point(ves_interp[q], state.vesicles[q].curve, pts.col(i));
        gaps.vesicle = std::min(gaps.vesicle, cp.dist);
      }
    }
    for (size_t c = 0; c < state.walls.comps.size(); ++c) {
      for (int i = 0; i < pts.cols(); ++i) {
        ClosestPoint cp =
            closest_point(wall_interp[c], state.walls.comps[c].curve, pts.col(i));
        gaps.wall = std::min(gaps.wall, cp.dist);
      }
    }
  }
  return gaps;
}

}  // namespace vesflow
