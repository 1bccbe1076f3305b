// End-to-end acceptance suite. Each test checks one quantitative target of
// the solver (quadrature and near-zone orders, convergence tables, scheme
// stability, preconditioner scaling, confined transits) and prints a single
// "ACCEPTANCE <k>: PASS/FAIL" line so verdicts can be scraped from the
// ctest log. Tolerances are pinned in the code next to each check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "vesflow/nearsing.hpp"
#include "vesflow/quadrature.hpp"
#include "vesflow/sim.hpp"

using namespace vesflow;

namespace {

using Clock = std::chrono::steady_clock;

double secs_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[768];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void verdict(const char* id, bool pass, const std::string& detail) {
  std::printf("ACCEPTANCE %s: %s - %s\n", id, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", id, ": ", detail);
}

// Least-squares slope of log(err) against log(n), sign-flipped so that
// errors decaying with refinement give a positive order.
double fitted_order(const std::vector<double>& n,
                    const std::vector<double>& err) {
  const int m = static_cast<int>(n.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    const double x = std::log(n[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return -(m * sxy - sx * sy) / (m * sxx - sx * sx);
}

RunConfig base_cfg(FlowKind kind, int n, int order, bool semi, double dt,
                   double horizon) {
  RunConfig cfg;
  cfg.scenario.kind = kind;
  cfg.scenario.n = n;
  cfg.scheme.order = order;
  cfg.scheme.semi_implicit = semi;
  cfg.scheme.dt = dt;
  cfg.scheme.gmres_tol = 1e-10;
  cfg.horizon = horizon;
  cfg.dt_floor = dt / 64.0;
  return cfg;
}

const DiagnosticsRecord* last_accepted(const RunResult& r) {
  for (auto it = r.diag.rbegin(); it != r.diag.rend(); ++it)
    if (it->collision_events == 0) return &*it;
  return nullptr;
}

double final_e_area(const RunResult& r) {
  const DiagnosticsRecord* d = last_accepted(r);
  return d ? d->e_area : std::numeric_limits<double>::quiet_NaN();
}

bool any_collision(const RunResult& r) {
  for (const auto& d : r.diag)
    if (d.collision_events > 0) return true;
  return false;
}

// Minimum-gap trace over the accepted steps.
std::vector<double> gap_series(const RunResult& r) {
  std::vector<double> g;
  for (const auto& d : r.diag)
    if (d.collision_events == 0) g.push_back(d.min_gap_vesicle);
  return g;
}

double min_vesicle_gap(const RunResult& r) {
  double m = std::numeric_limits<double>::infinity();
  for (double g : gap_series(r)) m = std::min(m, g);
  return m;
}

}  // namespace

TEST_CASE("log-kernel self quadrature reaches high order") {
  const auto t0 = Clock::now();
  // The Poisson kernel density (Fourier coefficients rho^|k|) pairs with
  // the periodic log kernel in closed form:
  //   int log(4 sin^2((theta-phi)/2)) P_rho(phi) dphi
  //     = 2 pi log(1 - 2 rho cos(theta) + rho^2),
  // so the product rule's error is the spectral tail ~ rho^(n/2).
  const double rho = 0.82;
  std::vector<double> ns, errs;
  for (int n : {32, 64, 128, 256}) {
    const VectorXd& w = kress_log_weights(n);
    double emax = 0.0;
    for (int i = 0; i < n; ++i) {
      double q = 0.0;
      for (int j = 0; j < n; ++j) {
        const double phi = 2.0 * M_PI * j / n;
        q += w[(j - i + n) % n] * (1.0 - rho * rho) /
             (1.0 - 2.0 * rho * std::cos(phi) + rho * rho);
      }
      const double theta = 2.0 * M_PI * i / n;
      const double exact =
          2.0 * M_PI * std::log(1.0 - 2.0 * rho * std::cos(theta) + rho * rho);
      emax = std::max(emax, std::abs(q - exact));
    }
    ns.push_back(n);
    errs.push_back(emax);
  }
  const double order = fitted_order(ns, errs);
  const double wall = secs_since(t0);
  verdict("1", order >= 7.0 && wall < 10.0,
          fmt("log-singular quadrature fitted order %.1f (need >= 7), error "
              "%.1e -> %.1e over n=32..256, %.2f s (limit 10)",
              order, errs.front(), errs.back(), wall));
}

TEST_CASE("winding indicator identities hold on and near the curve") {
  const Curve c = make_circle(64);
  const GeometryCache g = compute_geometry(c);
  const VectorXd ones = VectorXd::Ones(c.n());
  const auto ring = [](double r, double a0) {
    Matrix2Xd t(2, 8);
    for (int k = 0; k < 8; ++k) {
      const double a = a0 + 2.0 * M_PI * k / 8;
      t.col(k) = Vector2d(r * std::cos(a), r * std::sin(a));
    }
    return t;
  };
  const double e_in = (laplace_dlp_matrix(c, g, ring(0.3, 0.1)) * ones -
                       VectorXd::Ones(8))
                          .cwiseAbs()
                          .maxCoeff();
  const double e_on =
      (laplace_dlp_self_matrix(c, g) * ones - VectorXd::Constant(64, 0.5))
          .cwiseAbs()
          .maxCoeff();
  const double e_out =
      (laplace_dlp_matrix(c, g, ring(2.5, 0.2)) * ones).cwiseAbs().maxCoeff();
  const double h = mesh_spacing(g);
  const double e_near_in =
      (near_eval_laplace(c, 1.0, ones, ring(1.0 - h / 4, 0.123)) -
       VectorXd::Ones(8))
          .cwiseAbs()
          .maxCoeff();
  const double e_near_out =
      near_eval_laplace(c, 1.0, ones, ring(1.0 + h / 4, 0.123))
          .cwiseAbs()
          .maxCoeff();
  const bool pass = e_in < 1e-10 && e_on < 1e-10 && e_out < 1e-10 &&
                    e_near_in < 1e-6 && e_near_out < 1e-6;
  verdict("2", pass,
          fmt("indicator 1 / 0.5 / 0 at n=64: inside %.1e, on %.1e, outside "
              "%.1e (tol 1e-10); targets h/4 off the curve: %.1e / %.1e "
              "(tol 1e-6)",
              e_in, e_on, e_out, e_near_in, e_near_out));
}

TEST_CASE("near-zone evaluation order and exactness on linear fields") {
  const auto t0 = Clock::now();
  // A point force inside a 3:2 ellipse supplies the exterior test field;
  // the single-layer density is solved on the curve and the potential is
  // evaluated half a mesh spacing off it. A linear (extensional) interior
  // field does the same on the inside, where the ray interpolation is
  // exact and only quadrature error remains.
  const Vector2d pole(0.3, 0.15);
  const Vector2d force(1.0, 0.7);
  const LayerSpec slp{LayerKind::StokesSLP, 1.0, 0.0, 1.0};
  std::vector<double> ns, errs;
  double lin_worst = 0.0;  // over n >= 128
  for (int n : {16, 32, 64, 128, 256, 512}) {
    const Curve c = make_ellipse(n, 1.5, 1.0);
    const GeometryCache g = compute_geometry(c);
    const CurveInterp ci(c);
    const double h = mesh_spacing(g);
    Matrix2Xd t_out(2, 32), t_in(2, 32);
    for (int k = 0; k < 32; ++k) {
      const double a = 2.0 * M_PI * k / 32 + 0.137;
      const Vector2d x0 = ci.position(a);
      const Vector2d d = ci.derivative(a);
      const Vector2d nrm = Vector2d(d.y(), -d.x()).normalized();
      t_out.col(k) = x0 + 0.5 * h * nrm;
      t_in.col(k) = x0 - 0.5 * h * nrm;
    }
    const MatrixXd S = stokes_slp_self_matrix(c, g, 1.0);
    const auto lu = S.partialPivLu();

    Matrix2Xd u_b(2, n);
    for (int j = 0; j < n; ++j)
      u_b.col(j) = stokeslet(c.x.col(j), pole, force, 1.0);
    const Matrix2Xd sig = unstack_xy(lu.solve(stack_xy(u_b)));
    const Matrix2Xd got = near_eval_stokes(c, slp, sig, t_out);
    double e = 0.0;
    for (int k = 0; k < 32; ++k)
      e = std::max(e, (got.col(k) - stokeslet(t_out.col(k), pole, force, 1.0))
                          .cwiseAbs()
                          .maxCoeff());
    ns.push_back(n);
    errs.push_back(e);

    Matrix2Xd u_l(2, n);
    u_l.row(0) = -c.x.row(0);
    u_l.row(1) = c.x.row(1);
    const Matrix2Xd sig_l = unstack_xy(lu.solve(stack_xy(u_l)));
    const Matrix2Xd got_l = near_eval_stokes(c, slp, sig_l, t_in);
    double el = 0.0;
    for (int k = 0; k < 32; ++k) {
      const Vector2d exact(-t_in(0, k), t_in(1, k));
      el = std::max(el, (got_l.col(k) - exact).cwiseAbs().maxCoeff());
    }
    if (n >= 128) lin_worst = std::max(lin_worst, el);
  }
  const double order = fitted_order(ns, errs);
  const double wall = secs_since(t0);
  const bool pass =
      order >= 4.5 && order <= 5.5 && lin_worst < 1e-12 && wall < 60.0;
  verdict("3", pass,
          fmt("point-force field order %.2f (need 4.5..5.5; error %.1e -> "
              "%.1e over n=16..512); linear field max %.1e for n >= 128 "
              "(tol 1e-12); %.1f s (limit 60)",
              order, errs.front(), errs.back(), lin_worst, wall));
}

TEST_CASE("shear pair converges at first and second order") {
  const double table[3] = {6.73e-2, 3.36e-2, 1.68e-2};
  const int ns[3] = {32, 64, 128};
  const double dts[3] = {0.04, 0.02, 0.01};
  bool runs_ok = true;
  double e1[3];
  for (int i = 0; i < 3; ++i) {
    const RunResult r =
        simulate(base_cfg(FlowKind::Shear, ns[i], 1, false, dts[i], 12.0));
    runs_ok = runs_ok && r.exit_code == 0;
    e1[i] = final_e_area(r);
  }
  bool ref_ok = true;
  for (int i = 0; i < 3; ++i)
    ref_ok = ref_ok && e1[i] > table[i] / 3.0 && e1[i] < table[i] * 3.0;
  const double r01 = e1[0] / e1[1], r12 = e1[1] / e1[2];
  const bool ratio_ok =
      r01 >= 1.7 && r01 <= 2.3 && r12 >= 1.7 && r12 <= 2.3;
  double e2[2];
  for (int i = 0; i < 2; ++i) {
    const RunResult r =
        simulate(base_cfg(FlowKind::Shear, ns[i], 2, true, dts[i], 12.0));
    runs_ok = runs_ok && r.exit_code == 0;
    e2[i] = final_e_area(r);
  }
  const double order2 = std::log2(e2[0] / e2[1]);
  const bool o2_ok = order2 >= 2.0 && e2[0] < 1e-3;
  verdict("4", runs_ok && ref_ok && ratio_ok && o2_ok,
          fmt("order 1: e_A %.2e/%.2e/%.2e vs reference %.2e/%.2e/%.2e "
              "(factor-3 windows), ratios %.2f,%.2f (need 1.7..2.3); order "
              "2: %.2e -> %.2e, fitted %.2f (need >= 2, coarsest < 1e-3)",
              e1[0], e1[1], e1[2], table[0], table[1], table[2], r01, r12,
              e2[0], e2[1], order2));
}

TEST_CASE("viscosity contrast converges and pulls the pair closer") {
  bool runs_ok = true;
  const auto run = [&runs_ok](int n, double dt, int order, bool semi,
                              double nu, double off, double sep,
                              double horizon) {
    RunConfig cfg = base_cfg(FlowKind::Shear, n, order, semi, dt, horizon);
    cfg.scenario.nu = nu;
    cfg.scenario.shear_offset = off;
    cfg.scenario.shear_separation = sep;
    const RunResult r = simulate(cfg);
    runs_ok = runs_ok && r.exit_code == 0;
    return r;
  };
  // Convergence at the default pass geometry.
  const double ea1[2] = {
      final_e_area(run(32, 0.04, 1, false, 4.0, 0.4, 3.0, 12.0)),
      final_e_area(run(64, 0.02, 1, false, 4.0, 0.4, 3.0, 12.0))};
  const double ea2[2] = {
      final_e_area(run(32, 0.04, 2, true, 4.0, 0.4, 3.0, 12.0)),
      final_e_area(run(64, 0.02, 2, true, 4.0, 0.4, 3.0, 12.0))};
  const double o1 = std::log2(ea1[0] / ea1[1]);
  const double o2 = std::log2(ea2[0] / ea2[1]);
  // Approach distance in a close pass (left vesicle barely above the
  // axis): the stiffer interior makes the pair behave more rigidly and
  // squeeze closer than the freely tank-treading pair.
  const double off = 0.1, sep = 1.2, hor = 8.0;
  const RunResult g4 = run(64, 0.02, 1, true, 4.0, off, sep, hor);
  const RunResult g1 = run(64, 0.02, 1, true, 1.0, off, sep, hor);
  const RunResult g4b = run(64, 0.02, 2, true, 4.0, off, sep, hor);
  const double m4 = min_vesicle_gap(g4), m1 = min_vesicle_gap(g1);
  const std::vector<double> s1 = gap_series(g4), s2 = gap_series(g4b);
  double rel = 0.0;
  for (size_t i = 0; i < std::min(s1.size(), s2.size()); ++i)
    rel = std::max(rel, std::abs(s1[i] - s2[i]) / std::min(s1[i], s2[i]));
  const bool pass = runs_ok && o1 >= 0.75 && o2 >= 1.6 && m4 < m1 &&
                    rel < 0.05 && !s1.empty() && s1.size() == s2.size();
  verdict("5", pass,
          fmt("contrast 4 orders: %.2f (order 1), %.2f (order 2); close-pass "
              "min gap %.4f (contrast 4) < %.4f (contrast 1); order-1 vs "
              "order-2 gap curves differ %.1f%% (limit 5%%)",
              o1, o2, m4, m1, 100.0 * rel));
}

TEST_CASE("coupled solve preconditioner is mesh independent") {
  const int sizes[4] = {16, 32, 64, 128};
  int pre[4] = {0, 0, 0, 0};
  bool conv_ok = true;
  int unpre_iters = 0;
  bool unpre_conv = false;
  for (int i = 0; i < 4; ++i) {
    ScenarioConfig sc;
    sc.kind = FlowKind::TaylorGreen;
    sc.n = sizes[i];
    sc.tg_gap = 0.32;  // mesh-independent starting geometry
    const Scenario s = build_scenario(sc);
    SchemeConfig scheme;
    scheme.order = 1;
    scheme.semi_implicit = true;
    scheme.dt = 0.02;
    scheme.gmres_tol = 1e-8;
    const auto fs = freeze_system(s.state, scheme, nullptr, s.flow);
    const VectorXd rhs = frozen_rhs(*fs);
    const LinOp ap = [&fs](const VectorXd& v) { return frozen_apply(*fs, v); };
    const LinOp pc = [&fs](const VectorXd& v) {
      return frozen_precondition(*fs, v);
    };
    const GmresResult g = gmres(ap, pc, rhs, 1e-8, 400);
    conv_ok = conv_ok && g.converged;
    pre[i] = g.iters;
    if (sizes[i] == 128) {
      // 600 iterations without convergence already witnesses the >= 20x
      // gap, so the unpreconditioned solve is capped there.
      const GmresResult u = gmres(ap, nullptr, rhs, 1e-8, 600);
      unpre_iters = u.iters;
      unpre_conv = u.converged;
    }
  }
  const int lo = *std::min_element(pre, pre + 4);
  const int hi = *std::max_element(pre, pre + 4);
  const bool spread_ok = hi <= 1.5 * lo;
  const bool gain_ok = unpre_iters >= 20 * pre[3];
  verdict("6", conv_ok && spread_ok && gain_ok,
          fmt("one coupled step, preconditioned iterations at n=16/32/64/128: "
              "%d/%d/%d/%d (spread %.0f%%, limit 50%%); unpreconditioned at "
              "n=128: %s%d iterations (need >= %d)",
              pre[0], pre[1], pre[2], pre[3], 100.0 * (hi - lo) / lo,
              unpre_conv ? "" : ">=", unpre_iters, 20 * pre[3]));
}

TEST_CASE("explicit coupling crosses where semi-implicit survives") {
  const RunResult ex =
      simulate(base_cfg(FlowKind::TaylorGreen, 64, 1, false, 0.02, 1.0));
  double t_cross = -1.0;
  for (const auto& d : ex.diag)
    if (d.collision_events > 0) {
      t_cross = d.t;
      break;
    }
  const bool ex_ok = ex.exit_code != 0 && t_cross >= 0.0 && t_cross < 1.0;
  const RunResult se =
      simulate(base_cfg(FlowKind::TaylorGreen, 64, 1, true, 0.02, 1.0));
  const bool se_ok = se.exit_code == 0 && !any_collision(se);
  verdict("7", ex_ok && se_ok,
          fmt("explicit coupling: crossing detected at t=%.2f (< 1), run "
              "aborted (exit %d); semi-implicit coupling: horizon reached "
              "with no crossing (e_A %.1e)",
              t_cross, ex.exit_code, final_e_area(se)));
}

TEST_CASE("close extensional pair needs near-zone integration") {
  const RunResult on =
      simulate(base_cfg(FlowKind::Extensional, 32, 1, false, 0.04, 24.0));
  RunConfig naive_cfg = base_cfg(FlowKind::Extensional, 32, 1, false, 0.04, 12.0);
  naive_cfg.scheme.near_singular = false;
  const RunResult naive = simulate(naive_cfg);
  double e_on_12 = std::numeric_limits<double>::quiet_NaN();
  for (const auto& d : on.diag)
    if (d.collision_events == 0 && d.t >= 12.0 - 0.02) {
      e_on_12 = d.e_area;
      break;
    }
  const double e_naive = final_e_area(naive);
  const bool ratio_ok =
      naive.exit_code == 0 && e_naive >= 10.0 * e_on_12 && e_on_12 > 0.0;
  const RunResult on64 =
      simulate(base_cfg(FlowKind::Extensional, 64, 1, false, 0.02, 24.0));
  const double e32 = final_e_area(on), e64 = final_e_area(on64);
  const bool tab_ok = on.exit_code == 0 && on64.exit_code == 0 &&
                      e32 > 1.99e-4 / 3.0 && e32 < 1.99e-4 * 3.0 &&
                      e64 > 3.13e-5 / 3.0 && e64 < 3.13e-5 * 3.0;
  verdict("8", ratio_ok && tab_ok,
          fmt("plain-rule e_A %.2e vs near-integrated %.2e at t=12 (%.0fx, "
              "need >= 10x); near-integrated to t=24: %.2e / %.2e vs "
              "reference 1.99e-4 / 3.13e-5 (factor-3 windows)",
              e_naive, e_on_12, e_naive / e_on_12, e32, e64));
}

TEST_CASE("second-order errors plateau over long horizons") {
  double rate[2] = {0.0, 0.0};
  bool runs_ok = true;
  for (int order : {1, 2}) {
    const RunResult r =
        simulate(base_cfg(FlowKind::TaylorGreen, 32, order, true, 0.02, 10.0));
    runs_ok = runs_ok && r.exit_code == 0;
    const DiagnosticsRecord* ref = nullptr;
    for (const auto& d : r.diag)
      if (d.collision_events == 0 && d.t >= 10.0 * 2.0 / 3.0) {
        ref = &d;
        break;
      }
    const DiagnosticsRecord* fin = last_accepted(r);
    if (!ref || !fin || fin->t <= ref->t) {
      runs_ok = false;
      continue;
    }
    rate[order - 1] = (fin->e_length - ref->e_length) / (fin->t - ref->t);
  }
  const bool pass = runs_ok && rate[0] > 0.0 && rate[1] <= 0.5 * rate[0];
  verdict("9", pass,
          fmt("e_L growth rate over the final third: %.2e per unit time "
              "(order 1) vs %.2e (order 2, need <= half)",
              rate[0], rate[1]));
}

TEST_CASE("circular equilibrium is stationary for every scheme") {
  double worst = 0.0;
  bool runs_ok = true;
  for (int order : {1, 2})
    for (bool semi : {false, true}) {
      RunConfig cfg =
          base_cfg(FlowKind::Relaxation, 32, order, semi, 0.01, 1.0);
      cfg.scenario.reduced_area = 1.0;
      const RunResult r = simulate(cfg);
      const DiagnosticsRecord* d = last_accepted(r);
      long accepted = 0;
      for (const auto& rec : r.diag)
        if (rec.collision_events == 0) ++accepted;
      runs_ok = runs_ok && r.exit_code == 0 && d && accepted == 100;
      if (d) worst = std::max({worst, d->e_area, d->e_length});
    }
  verdict("10", runs_ok && worst < 1e-8,
          fmt("100 steps under all four schemes: max(e_A, e_L) = %.1e "
              "(tol 1e-8)",
              worst));
}

TEST_CASE("vesicle transits the constriction cleanly") {
  const auto t0 = Clock::now();
  const RunResult r =
      simulate(base_cfg(FlowKind::Stenosis, 128, 2, true, 5e-3, 8.0));
  const double wall = secs_since(t0);
  double min_wall_gap = std::numeric_limits<double>::infinity();
  for (const auto& d : r.diag)
    if (d.collision_events == 0)
      min_wall_gap = std::min(min_wall_gap, d.min_gap_wall);
  const double e = final_e_area(r);
  const bool pass = r.exit_code == 0 && e <= 1e-2 && min_wall_gap > 0.0 &&
                    !any_collision(r) && r.rollbacks == 0 && wall < 1800.0;
  verdict("11", pass,
          fmt("n=128, wall 256, dt=5e-3, order 2: e_A %.2e (tol 1e-2), min "
              "wall gap %.3f (> 0), no collision flags, %ld rollbacks, "
              "%.0f s (limit 1800)",
              e, min_wall_gap, r.rollbacks, wall));
}

TEST_CASE("seeded annular suspension completes") {
  const RunResult r =
      simulate(base_cfg(FlowKind::Couette, 32, 2, true, 0.02, 2.0));
  const double e = final_e_area(r);
  const bool pass = r.exit_code == 0 && !any_collision(r) && e < 5e-2;
  verdict("12", pass,
          fmt("rotating annulus, 8 seeded vesicles to t=2: exit %d, no "
              "crossing, e_A %.2e (tol 5e-2)",
              r.exit_code, e));
}
