#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "vesflow/quadrature.hpp"

// Near-singular evaluation of layer potentials. Targets closer to a source
// curve than one arclength spacing h get interpolated values: the
// potential on the curve itself (one-sided limit at the closest point)
// and at a short stencil of points marching away from the curve along the
// closest-point ray, all evaluated with the upsampled trapezoid rule, are
// combined by 1D Lagrange interpolation. Targets beyond h use the
// upsampled trapezoid rule directly.

namespace vesflow {

// h = max mesh spacing (2 pi / n) * max_j |x_alpha(alpha_j)|.
double mesh_spacing(const GeometryCache& g);

struct ClosestPoint {
  double alpha = 0.0;   // parameter of the closest point
  Vector2d x0;          // its position
  double dist = 0.0;    // |target - x0|
};

// Two Newton iterations on d/dalpha |x(alpha) - p|^2 = 0 seeded from the
// nearest node (or from `seed` when given).
ClosestPoint closest_point(const CurveInterp& ci, const Curve& c,
                           const Vector2d& p,
                           std::optional<double> seed = std::nullopt);

struct NearTarget {
  int index;        // column in the target list
  double alpha0;    // closest point parameter
  Vector2d x0;      // closest point
  double dist;      // distance to the curve
  double side;      // sign((x - x0) . n_eff(alpha0)); 0 distance -> +1
};

struct ZoneMap {
  std::vector<char> near;          // per target: 1 if inside the near zone
  std::vector<NearTarget> records; // one record per near target
  double h = 0.0;
};

// Classifies targets against the near zone of the source curve. The cheap
// node-distance test prefilters; candidates within 2h of a node get the
// Newton refinement. normal_sign orients the side classification.
ZoneMap classify_targets(const Curve& c, const GeometryCache& g,
                         const CurveInterp& ci, const Matrix2Xd& targets,
                         double normal_sign = 1.0);

enum class LayerKind {
  StokesSLP,   // continuous across the curve
  StokesDLP,   // jump  (1-nu)/2 * density toward the normal side
  LaplaceDLP,  // jump -1/2 * density toward the normal side
};

struct LayerSpec {
  LayerKind kind = LayerKind::StokesSLP;
  double mu0 = 1.0;          // StokesSLP
  double nu = 0.0;           // StokesDLP prefactor (1 - nu)
  double normal_sign = 1.0;  // -1 flips the source normal (inner walls)
};

struct NearParams {
  int lagrange_points = 6;   // on-curve interpolation nodes
  int stencil_points = 6;    // stencil segments beyond the curve point
  double spacing_factor = 1.1;
};

// Wall-sourced potentials use a shorter stencil: the march away from the
// wall (stencil_points * spacing_factor * h) must fit inside the
// narrowest passage of the domain, or the interpolation points would
// straddle the opposite side of the wall. Vesicle-sourced potentials are
// smooth across other curves and keep the default reach.
inline NearParams wall_near_params() { return {6, 4, 0.9}; }

// Thrown when a stencil for a wall-sourced potential would cross a wall
// component (the interpolated function would be discontinuous); the run
// should be retried with a finer wall mesh.
struct StencilCrossesWall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Upsampled view of a source curve, shared by all cross interactions of
// one source per time step.
struct UpsampledSource {
  Curve curve;
  GeometryCache geom;
  CurveInterp interp;  // of the native curve (band-limited, same shape)
  int n_native = 0;

  UpsampledSource() = default;
  UpsampledSource(const Curve& native, int n_up);
  int n() const { return curve.n(); }
};

// Dense evaluation matrix from the upsampled source density to the
// targets: rows of far targets are the plain trapezoid rule; rows of near
// targets compose the interpolation scheme above. For Stokes kernels the
// result is (2T x 2N_up), for the indicator (T x N_up); column order
// follows stack_xy on the upsampled grid.
//
// `walls` (optional) lists curves that stencils must not cross; used when
// the source is a wall component.
MatrixXd near_eval_matrix(const UpsampledSource& src, const LayerSpec& spec,
                          const Matrix2Xd& targets, const ZoneMap& zones,
                          const NearParams& params = {},
                          const std::vector<const Curve*>* walls = nullptr);

// Convenience: classify + build + apply to a native-grid density.
Matrix2Xd near_eval_stokes(const Curve& src, const LayerSpec& spec,
                           const Matrix2Xd& density, const Matrix2Xd& targets,
                           const NearParams& params = {});
VectorXd near_eval_laplace(const Curve& src, double normal_sign,
                           const VectorXd& density, const Matrix2Xd& targets,
                           const NearParams& params = {});

}  // namespace vesflow
