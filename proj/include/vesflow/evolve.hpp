#pragma once

#include <Eigen/LU>

#include <functional>
#include <memory>

#include "vesflow/nearsing.hpp"

// Time stepping. Both schemes advance positions and solve tension and wall
// densities as algebraic unknowns:
//   semi-implicit: one GMRES solve couples every vesicle, the walls and
//     the inextensibility constraint; inter-body operators are frozen at
//     the extrapolated shape x^e and applied to the new densities.
//   explicit: inter-body interactions are evaluated with the previous
//     step's densities; each vesicle then solves its own small dense
//     system, after a direct wall solve.
// Order 1: beta = 1,   x0 = x^N,            x^e = x^N.
// Order 2: beta = 3/2, x0 = 2x^N - x^N-1/2, x^e = 2x^N - x^N-1 (the first
// step, or the step after a history reset, falls back to order 1).

namespace vesflow {

struct SchemeConfig {
  int order = 1;              // 1 or 2
  bool semi_implicit = true;  // inter-body coupling treatment
  double dt = 1e-2;
  double mu0 = 1.0;
  double gmres_tol = 1e-12;
  int gmres_maxit = 500;
  bool precondition = true;
  // false: inter-body terms sourced from vesicles fall back to the plain
  // native-grid trapezoid rule (no upsampling, no near-zone interpolation);
  // accuracy-study knob. Wall-sourced evaluation always keeps the full path.
  bool near_singular = true;
};

struct SystemState {
  std::vector<Vesicle> vesicles;
  WallSet walls;  // empty comps => unconfined

  std::vector<Matrix2Xd> eta;     // last wall densities, per component
  std::vector<Vector2d> lambda;   // completion strengths, per inner comp
  std::vector<double> xi;

  double t = 0.0;
  long step = 0;

  bool have_history = false;       // previous positions valid
  std::vector<Matrix2Xd> x_prev;   // x^{N-1}
  std::vector<Matrix2Xd> u_prev;   // u^N (zero before the first step)

  int total_vesicle_nodes() const;
  void reset_history();  // called after rollback or dt change
};

using BackgroundFlow = std::function<Matrix2Xd(const Matrix2Xd&)>;

// Unknown ordering: per vesicle [x (2n, x then y), sigma (n)], then per
// wall component [eta (2n_w)], then per inner component [lambda (2), xi].
struct Layout {
  std::vector<int> ves_off;
  std::vector<int> ves_n;
  std::vector<int> wall_off;
  std::vector<int> wall_n;
  int lam_off = 0;
  int total = 0;

  static Layout build(const SystemState& s);
};

struct GmresResult {
  VectorXd x;
  int iters = 0;
  double relres = 0.0;
  bool converged = false;
  std::vector<double> history;  // preconditioned residual per iteration
};

using LinOp = std::function<VectorXd(const VectorXd&)>;

// Full (non-restarted) GMRES with modified Gram-Schmidt and Givens
// rotations; `precond` may be null for an unpreconditioned solve.
GmresResult gmres(const LinOp& apply, const LinOp& precond, const VectorXd& b,
                  double tol, int maxit);

// Static wall data: the completed wall operator assembled on the native
// grids and factorized once per run (walls never move).
struct WallStatic {
  WallSet set;                       // geometry + boundary velocities
  std::vector<UpsampledSource> up;   // per component
  std::vector<CurveInterp> interp;   // native interpolants
  MatrixXd op;                       // completed operator + moment rows
  Eigen::PartialPivLU<MatrixXd> lu;
  std::vector<int> off;              // eta offset per component
  int lam_off = 0;                   // offset of (lambda, xi) triples
  int dofs = 0;

  VectorXd boundary_rhs() const;  // stacked U rows, zero moment rows
};

std::unique_ptr<WallStatic> build_wall_static(const WallSet& walls,
                                              double mu0);

// Evaluate the completed wall velocity (double layer + completion flows)
// at arbitrary targets from a wall solution vector; diagnostic/test use.
Matrix2Xd wall_velocity_at(const WallStatic& ws, const VectorXd& wall_solution,
                           const Matrix2Xd& targets, double mu0);

struct StepStats {
  int gmres_iters = 0;
  double residual = 0.0;
  bool converged = true;
  std::vector<double> residual_history;
};

// Advances the state by one step of the configured scheme in place.
// `ws` must be non-null when state.walls is non-empty. Throws
// StencilCrossesWall if a wall stencil cannot be placed (see nearsing).
StepStats take_step(SystemState& state, const SchemeConfig& cfg,
                    const WallStatic* ws, const BackgroundFlow& flow);

// The frozen coupled operator of the semi-implicit scheme, exposed for
// operator-level tests and the linear-system dump: y = A v and the
// right-hand side associated with the current state/history.
struct FrozenSystem;
std::shared_ptr<FrozenSystem> freeze_system(const SystemState& state,
                                            const SchemeConfig& cfg,
                                            const WallStatic* ws,
                                            const BackgroundFlow& flow);
VectorXd frozen_apply(const FrozenSystem& fs, const VectorXd& v);
VectorXd frozen_rhs(const FrozenSystem& fs);
VectorXd frozen_precondition(const FrozenSystem& fs, const VectorXd& v);
Layout frozen_layout(const FrozenSystem& fs);

}  // namespace vesflow
