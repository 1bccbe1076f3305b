#include "vesflow/evolve.hpp"

#include <cmath>
#include <stdexcept>

namespace vesflow {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

int SystemState::total_vesicle_nodes() const {
  int acc = 0;
  for (const Vesicle& v : vesicles) acc += v.n();
  return acc;
}

void SystemState::reset_history() {
  have_history = false;
  x_prev.clear();
}

Layout Layout::build(const SystemState& s) {
  Layout l;
  int off = 0;
  for (const Vesicle& v : s.vesicles) {
    l.ves_off.push_back(off);
    l.ves_n.push_back(v.n());
    off += 3 * v.n();
  }
  for (const WallComponent& w : s.walls.comps) {
    l.wall_off.push_back(off);
    l.wall_n.push_back(w.n());
    off += 2 * w.n();
  }
  l.lam_off = off;
  off += 3 * s.walls.holes();
  l.total = off;
  return l;
}

GmresResult gmres(const LinOp& apply, const LinOp& precond, const VectorXd& b,
                  double tol, int maxit) {
  GmresResult res;
  const int n = static_cast<int>(b.size());
  maxit = std::min(maxit, n);
  VectorXd r0 = precond ? precond(b) : b;
  const double beta0 = r0.norm();
  if (beta0 == 0.0) {
    res.x = VectorXd::Zero(n);
    res.converged = true;
    return res;
  }
  MatrixXd v(n, maxit + 1);
  MatrixXd h = MatrixXd::Zero(maxit + 1, maxit);
  VectorXd cs = VectorXd::Zero(maxit), sn = VectorXd::Zero(maxit);
  VectorXd g = VectorXd::Zero(maxit + 1);
  v.col(0) = r0 / beta0;
  g[0] = beta0;
  int k = 0;
  double resid = beta0;
  for (; k < maxit; ++k) {
    VectorXd w = apply(v.col(k));
    if (precond) w = precond(w);
    for (int i = 0; i <= k; ++i) {
      h(i, k) = v.col(i).dot(w);
      w -= h(i, k) * v.col(i);
    }
    h(k + 1, k) = w.norm();
    bool breakdown = h(k + 1, k) < 1e-300;
    if (!breakdown) v.col(k + 1) = w / h(k + 1, k);
    for (int i = 0; i < k; ++i) {  // apply stored rotations
      double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
      h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
      h(i, k) = t;
    }
    double denom = std::hypot(h(k, k), h(k + 1, k));
    cs[k] = h(k, k) / denom;
    sn[k] = h(k + 1, k) / denom;
    h(k, k) = denom;
    h(k + 1, k) = 0.0;
    g[k + 1] = -sn[k] * g[k];
    g[k] = cs[k] * g[k];
    resid = std::abs(g[k + 1]);
    res.history.push_back(resid / beta0);
    ++res.iters;
    if (resid <= tol * beta0 || breakdown) {
      ++k;
      break;
    }
  }
  VectorXd y(k);
  for (int i = k - 1; i >= 0; --i) {
    double acc = g[i];
    for (int j = i + 1; j < k; ++j) acc -= h(i, j) * y[j];
    y[i] = acc / h(i, i);
  }
  res.x = v.leftCols(k) * y;
  res.relres = resid / beta0;
  res.converged = res.relres <= tol;
  return res;
}

namespace {

// Dense upsampling operator for one scalar series (n -> n_up); only used
// for the once-per-run wall assembly.
MatrixXd upsample_operator(int n, int n_up) {
  MatrixXd u(n_up, n);
  VectorXd e = VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    u.col(j) = resample(e, n_up);
    e[j] = 0.0;
  }
  return u;
}

MatrixXd stacked_upsample_operator(int n, int n_up) {
  MatrixXd u = upsample_operator(n, n_up);
  MatrixXd out = MatrixXd::Zero(2 * n_up, 2 * n);
  out.topLeftCorner(n_up, n) = u;
  out.bottomRightCorner(n_up, n) = u;
  return out;
}

VectorXd upsampled_stack(const Matrix2Xd& f, int n_up) {
  return stack_xy(resample(f, n_up));
}

std::vector<const Curve*> wall_curve_ptrs(const WallSet& walls) {
  std::vector<const Curve*> out;
  for (const WallComponent& w : walls.comps) out.push_back(&w.curve);
  return out;
}

}  // namespace

VectorXd WallStatic::boundary_rhs() const {
  VectorXd rhs = VectorXd::Zero(dofs);
  for (size_t c = 0; c < set.comps.size(); ++c)
    rhs.segment(off[c], 2 * set.comps[c].n()) = stack_xy(set.comps[c].velocity);
  return rhs;
}

std::unique_ptr<WallStatic> build_wall_static(const WallSet& walls,
                                              double mu0) {
  if (walls.empty()) throw std::invalid_argument("empty wall set");
  auto ws = std::make_unique<WallStatic>();
  ws->set = walls;
  const int nc = static_cast<int>(walls.comps.size());
  int off = 0;
  for (const WallComponent& w : walls.comps) {
    ws->off.push_back(off);
    off += 2 * w.n();
  }
  ws->lam_off = off;
  ws->dofs = off + 3 * walls.holes();
  for (const WallComponent& w : walls.comps) {
    ws->up.emplace_back(w.curve, upsample_size(w.n()));
    ws->interp.emplace_back(w.curve);
  }

  MatrixXd& op = ws->op;
  op = MatrixXd::Zero(ws->dofs, ws->dofs);
  std::vector<const Curve*> guard = wall_curve_ptrs(walls);

  for (int a = 0; a < nc; ++a) {
    const WallComponent& wa = walls.comps[a];
    const int na = wa.n(), oa = ws->off[a];
    // jump + self principal value
    op.block(oa, oa, 2 * na, 2 * na) =
        -0.5 * MatrixXd::Identity(2 * na, 2 * na) +
        stokes_dlp_self_matrix(wa.curve, wa.geom, 0.0, wa.normal_sign());
    // rank correction on the outer boundary: N0[eta](x) over the outer wall
    if (wa.outer) {
      for (int i = 0; i < na; ++i) {
        Vector2d ni = wa.geom.normal.col(i);
        for (int j = 0; j < na; ++j) {
          Vector2d njds = wa.geom.normal.col(j) * wa.geom.ds[j];
          op(oa + i, oa + j) += ni[0] * njds[0];
          op(oa + i, oa + na + j) += ni[0] * njds[1];
          op(oa + na + i, oa + j) += ni[1] * njds[0];
          op(oa + na + i, oa + na + j) += ni[1] * njds[1];
        }
      }
    }
    // other components' double layers, upsampled then restricted to the
    // native density grid
    for (int b = 0; b < nc; ++b) {
      if (b == a) continue;
      const WallComponent& wb = walls.comps[b];
      ZoneMap zm = classify_targets(wb.curve, wb.geom, ws->interp[b],
                                    wa.curve.x, wb.normal_sign());
      LayerSpec spec;
      spec.kind = LayerKind::StokesDLP;
      spec.nu = 0.0;
      spec.normal_sign = wb.normal_sign();
      MatrixXd cross = near_eval_matrix(ws->up[b], spec, wa.curve.x, zm,
                                        wall_near_params(), &guard);
      op.block(oa, ws->off[b], 2 * na, 2 * wb.n()) =
          cross * stacked_upsample_operator(wb.n(), ws->up[b].n());
    }
    // completion flow columns of every hole
    for (int q = 1; q < nc; ++q) {
      op.block(oa, ws->lam_off + 3 * (q - 1), 2 * na, 3) =
          stokeslet_rotlet_matrix(wa.curve.x, walls.comps[q].center, mu0);
    }
  }
  // moment rows tie the completion strengths to the hole densities
  for (int q = 1; q < nc; ++q) {
    const WallComponent& wq = walls.comps[q];
    const int oq = ws->off[q], r0 = ws->lam_off + 3 * (q - 1);
    op(r0, r0) = 1.0;
    op(r0 + 1, r0 + 1) = 1.0;
    op(r0 + 2, r0 + 2) = 1.0;
    for (int j = 0; j < wq.n(); ++j) {
      double w = wq.geom.ds[j] / kTwoPi;
      Vector2d r = wq.curve.x.col(j) - wq.center;
      op(r0, oq + j) -= w;
      op(r0 + 1, oq + wq.n() + j) -= w;
      op(r0 + 2, oq + j) -= r[1] * w;
      op(r0 + 2, oq + wq.n() + j) += r[0] * w;
    }
  }
  ws->lu.compute(op);
  return ws;
}

Matrix2Xd wall_velocity_at(const WallStatic& ws, const VectorXd& wall_solution,
                           const Matrix2Xd& targets, double mu0) {
  const int t = static_cast<int>(targets.cols());
  VectorXd acc = VectorXd::Zero(2 * t);
  std::vector<const Curve*> guard = wall_curve_ptrs(ws.set);
  for (size_t b = 0; b < ws.set.comps.size(); ++b) {
    const WallComponent& wb = ws.set.comps[b];
    ZoneMap zm = classify_targets(wb.curve, wb.geom, ws.interp[b], targets,
                                  wb.normal_sign());
    LayerSpec spec;
    spec.kind = LayerKind::StokesDLP;
    spec.nu = 0.0;
    spec.normal_sign = wb.normal_sign();
    MatrixXd m =
        near_eval_matrix(ws.up[b], spec, targets, zm, wall_near_params(), &guard);
    Matrix2Xd eta = unstack_xy(wall_solution.segment(ws.off[b], 2 * wb.n()));
    acc += m * upsampled_stack(eta, ws.up[b].n());
  }
  for (int q = 1; q < static_cast<int>(ws.set.comps.size()); ++q) {
    acc += stokeslet_rotlet_matrix(targets, ws.set.comps[q].center, mu0) *
           wall_solution.segment(ws.lam_off + 3 * (q - 1), 3);
  }
  return unstack_xy(acc);
}

// ---------------------------------------------------------------------------
// Frozen coupled system

struct FrozenSystem {
  Layout lay;
  SchemeConfig cfg;
  const WallStatic* ws = nullptr;
  int m = 0;  // vesicle count
  double beta = 1.0;
  std::vector<double> alpha, nu, kappa;
  std::vector<int> n, nup;
  std::vector<Matrix2Xd> x0;  // history combination per vesicle
  std::vector<Curve> ce;      // frozen shapes x^e
  std::vector<GeometryCache> ge;
  std::vector<UpsampledSource> upv;
  std::vector<MatrixXd> slp, dlp, bend, tens, divm;
  // LU of the gauge-penalized block M = A + rho u u^T (u = constant
  // tension direction). The single layer of the unit normal field
  // vanishes identically, so on curves of constant curvature a constant
  // tension produces no velocity and A itself is exactly singular.
  std::vector<Eigen::PartialPivLU<MatrixXd>> plu;
  std::vector<double> gauge_rho;
  std::vector<VectorXd> gauge_z;      // M^{-1} u
  std::vector<double> gauge_denom;    // 1 - rho u^T M^{-1} u
  std::vector<std::vector<MatrixXd>> ks, kd;    // [target p][source q]
  std::vector<std::vector<MatrixXd>> kwv;       // [p][wall comp]
  std::vector<std::vector<MatrixXd>> cwv;       // [p][hole]
  std::vector<std::vector<MatrixXd>> kvws, kvwd;  // [wall comp][q]
  std::vector<Matrix2Xd> uinf;
  VectorXd rhs;

  int wall_comps() const {
    return ws ? static_cast<int>(ws->set.comps.size()) : 0;
  }
};

namespace {

// Per-vesicle implicit block: rows are the momentum and inextensibility
// equations restricted to this vesicle's own unknowns.
MatrixXd vesicle_block(const FrozenSystem& fs, int p) {
  const int n = fs.n[p];
  const double bdt = fs.beta / fs.cfg.dt;
  MatrixXd a = MatrixXd::Zero(3 * n, 3 * n);
  a.topLeftCorner(2 * n, 2 * n) =
      fs.alpha[p] * bdt * MatrixXd::Identity(2 * n, 2 * n) -
      fs.slp[p] * fs.bend[p];
  if (fs.dlp[p].size()) a.topLeftCorner(2 * n, 2 * n) -= bdt * fs.dlp[p];
  a.block(0, 2 * n, 2 * n, n) = -fs.slp[p] * fs.tens[p];
  a.block(2 * n, 0, n, 2 * n) = fs.beta * fs.divm[p];
  return a;
}

VectorXd gauge_direction(int n) {
  VectorXd u = VectorXd::Zero(3 * n);
  u.tail(n).setConstant(1.0 / std::sqrt(double(n)));
  return u;
}

// Direct solve of the true block A = M - rho u u^T via Sherman-Morrison;
// when the denominator vanishes A is singular (constant-curvature shape)
// and the penalized solution solves A x = b in the mean-free tension
// gauge, so it is returned as is.
VectorXd vesicle_block_solve(const FrozenSystem& fs, int p, const VectorXd& b) {
  VectorXd xhat = fs.plu[p].solve(b);
  const double d = fs.gauge_denom[p];
  if (std::abs(d) < 1e-10) return xhat;
  const int n = fs.n[p];
  const double udotx = xhat.tail(n).sum() / std::sqrt(double(n));
  return xhat + (fs.gauge_rho[p] * udotx / d) * fs.gauge_z[p];
}

}  // namespace

std::shared_ptr<FrozenSystem> freeze_system(const SystemState& state,
                                            const SchemeConfig& cfg,
                                            const WallStatic* ws,
                                            const BackgroundFlow& flow) {
  auto fs = std::make_shared<FrozenSystem>();
  fs->lay = Layout::build(state);
  fs->cfg = cfg;
  fs->ws = state.walls.empty() ? nullptr : ws;
  if (!state.walls.empty() && !ws)
    throw std::invalid_argument("confined state requires wall data");
  fs->m = static_cast<int>(state.vesicles.size());

  const bool second = cfg.order == 2 && state.have_history;
  fs->beta = second ? 1.5 : 1.0;
  for (int p = 0; p < fs->m; ++p) {
    const Vesicle& v = state.vesicles[p];
    fs->n.push_back(v.n());
    fs->nup.push_back(cfg.near_singular ? upsample_size(v.n()) : v.n());
    fs->alpha.push_back(0.5 * (1.0 + v.nu));
    fs->nu.push_back(v.nu);
    fs->kappa.push_back(v.kappa);
    Matrix2Xd xe, x0;
    if (second) {
      xe = 2.0 * v.curve.x - state.x_prev[p];
      x0 = 2.0 * v.curve.x - 0.5 * state.x_prev[p];
    } else {
      xe = v.curve.x;
      x0 = v.curve.x;
    }
    fs->x0.push_back(x0);
    fs->ce.emplace_back(xe);
    fs->ge.push_back(compute_geometry(fs->ce.back()));
    fs->upv.emplace_back(fs->ce.back(), fs->nup[p]);
  }

  for (int p = 0; p < fs->m; ++p) {
    const Curve& c = fs->ce[p];
    const GeometryCache& g = fs->ge[p];
    fs->slp.push_back(stokes_slp_self_matrix(c, g, cfg.mu0));
    fs->dlp.push_back(fs->nu[p] != 1.0
                          ? stokes_dlp_self_matrix(c, g, fs->nu[p])
                          : MatrixXd());
    fs->bend.push_back(bending_matrix(g, fs->kappa[p]));
    fs->tens.push_back(tension_matrix(g));
    fs->divm.push_back(surface_divergence_matrix(g));
    fs->uinf.push_back(flow ? flow(c.x) : Matrix2Xd::Zero(2, c.n()));
  }
  for (int p = 0; p < fs->m; ++p) {
    const int n = fs->n[p];
    const double rho = fs->alpha[p] * fs->beta / cfg.dt;
    MatrixXd block = vesicle_block(*fs, p);
    VectorXd u = gauge_direction(n);
    block.noalias() += rho * u * u.transpose();
    fs->plu.emplace_back(block);
    fs->gauge_rho.push_back(rho);
    fs->gauge_z.push_back(fs->plu.back().solve(u));
    fs->gauge_denom.push_back(1.0 - rho * u.dot(fs->gauge_z.back()));
  }

  // vesicle-vesicle blocks at the frozen shapes; with near_singular off the
  // zone map is left empty, so every target takes the plain trapezoid rule
  // on the native grid (the baseline the interpolation scheme improves on)
  fs->ks.assign(fs->m, std::vector<MatrixXd>(fs->m));
  fs->kd.assign(fs->m, std::vector<MatrixXd>(fs->m));
  for (int q = 0; q < fs->m; ++q) {
    for (int p = 0; p < fs->m; ++p) {
      if (p == q) continue;
      ZoneMap zm;
      zm.near.assign(fs->ce[p].n(), 0);
      if (cfg.near_singular)
        zm = classify_targets(fs->ce[q], fs->ge[q], fs->upv[q].interp,
                              fs->ce[p].x);
      LayerSpec slp_spec;
      slp_spec.kind = LayerKind::StokesSLP;
      slp_spec.mu0 = cfg.mu0;
      fs->ks[p][q] = near_eval_matrix(fs->upv[q], slp_spec, fs->ce[p].x, zm);
      if (fs->nu[q] != 1.0) {
        LayerSpec dlp_spec;
        dlp_spec.kind = LayerKind::StokesDLP;
        dlp_spec.nu = fs->nu[q];
        fs->kd[p][q] = near_eval_matrix(fs->upv[q], dlp_spec, fs->ce[p].x, zm);
      }
    }
  }

  if (fs->ws) {
    const WallSet& walls = fs->ws->set;
    const int nc = static_cast<int>(walls.comps.size());
    std::vector<const Curve*> guard = wall_curve_ptrs(walls);
    fs->kwv.assign(fs->m, std::vector<MatrixXd>(nc));
    fs->cwv.assign(fs->m, std::vector<MatrixXd>(walls.holes()));
    for (int p = 0; p < fs->m; ++p) {
      for (int c = 0; c < nc; ++c) {
        const WallComponent& w = walls.comps[c];
        ZoneMap zm = classify_targets(w.curve, w.geom, fs->ws->interp[c],
                                      fs->ce[p].x, w.normal_sign());
        LayerSpec spec;
        spec.kind = LayerKind::StokesDLP;
        spec.nu = 0.0;
        spec.normal_sign = w.normal_sign();
        fs->kwv[p][c] = near_eval_matrix(fs->ws->up[c], spec, fs->ce[p].x, zm,
                                         wall_near_params(), &guard);
      }
      for (int q = 1; q < nc; ++q)
        fs->cwv[p][q - 1] = stokeslet_rotlet_matrix(
            fs->ce[p].x, walls.comps[q].center, cfg.mu0);
    }
    fs->kvws.assign(nc, std::vector<MatrixXd>(fs->m));
    fs->kvwd.assign(nc, std::vector<MatrixXd>(fs->m));
    for (int c = 0; c < nc; ++c) {
      const WallComponent& w = walls.comps[c];
      for (int q = 0; q < fs->m; ++q) {
        ZoneMap zm;
        zm.near.assign(w.curve.n(), 0);
        if (cfg.near_singular)
          zm = classify_targets(fs->ce[q], fs->ge[q], fs->upv[q].interp,
                                w.curve.x);
        LayerSpec slp_spec;
        slp_spec.kind = LayerKind::StokesSLP;
        slp_spec.mu0 = cfg.mu0;
        fs->kvws[c][q] =
            near_eval_matrix(fs->upv[q], slp_spec, w.curve.x, zm);
        if (fs->nu[q] != 1.0) {
          LayerSpec dlp_spec;
          dlp_spec.kind = LayerKind::StokesDLP;
          dlp_spec.nu = fs->nu[q];
          fs->kvwd[c][q] =
              near_eval_matrix(fs->upv[q], dlp_spec, w.curve.x, zm);
        }
      }
    }
  }

  // right-hand side of the semi-implicit system
  const double idt = 1.0 / cfg.dt;
  VectorXd rhs = VectorXd::Zero(fs->lay.total);
  std::vector<VectorXd> x0up(fs->m);
  for (int q = 0; q < fs->m; ++q)
    x0up[q] = upsampled_stack(fs->x0[q], fs->nup[q]);
  for (int p = 0; p < fs->m; ++p) {
    const int n = fs->n[p], o = fs->lay.ves_off[p];
    VectorXd x0s = stack_xy(fs->x0[p]);
    VectorXd mom = fs->alpha[p] * idt * x0s + stack_xy(fs->uinf[p]);
    if (fs->dlp[p].size()) mom -= idt * (fs->dlp[p] * x0s);
    for (int q = 0; q < fs->m; ++q)
      if (q != p && fs->kd[p][q].size())
        mom -= idt * (fs->kd[p][q] * x0up[q]);
    rhs.segment(o, 2 * n) = mom;
    rhs.segment(o + 2 * n, n) = fs->divm[p] * x0s;
  }
  if (fs->ws) {
    VectorXd wrhs = fs->ws->boundary_rhs();
    for (int c = 0; c < fs->wall_comps(); ++c) {
      const int nw = fs->lay.wall_n[c];
      VectorXd seg = wrhs.segment(fs->ws->off[c], 2 * nw);
      for (int q = 0; q < fs->m; ++q)
        if (fs->kvwd[c][q].size()) seg += idt * (fs->kvwd[c][q] * x0up[q]);
      rhs.segment(fs->lay.wall_off[c], 2 * nw) = seg;
    }
  }
  fs->rhs = rhs;
  return fs;
}

VectorXd frozen_apply(const FrozenSystem& fs, const VectorXd& v) {
  const Layout& lay = fs.lay;
  const double bdt = fs.beta / fs.cfg.dt;
  VectorXd out = VectorXd::Zero(lay.total);

  // tractions of the candidate state, upsampled once per vesicle
  std::vector<VectorXd> f(fs.m), fup(fs.m), xup(fs.m);
  for (int q = 0; q < fs.m; ++q) {
    const int n = fs.n[q], o = lay.ves_off[q];
    VectorXd xq = v.segment(o, 2 * n);
    VectorXd sq = v.segment(o + 2 * n, n);
    f[q] = fs.bend[q] * xq + fs.tens[q] * sq;
    fup[q] = upsampled_stack(unstack_xy(f[q]), fs.nup[q]);
    if (fs.m > 1 || fs.ws) xup[q] = upsampled_stack(unstack_xy(xq), fs.nup[q]);
  }

  std::vector<VectorXd> etaup(fs.wall_comps());
  if (fs.ws) {
    for (int c = 0; c < fs.wall_comps(); ++c) {
      Matrix2Xd eta =
          unstack_xy(v.segment(lay.wall_off[c], 2 * lay.wall_n[c]));
      etaup[c] = upsampled_stack(eta, fs.ws->up[c].n());
    }
  }

  for (int p = 0; p < fs.m; ++p) {
    const int n = fs.n[p], o = lay.ves_off[p];
    VectorXd xp = v.segment(o, 2 * n);
    VectorXd mom = fs.alpha[p] * bdt * xp - fs.slp[p] * f[p];
    if (fs.dlp[p].size()) mom -= bdt * (fs.dlp[p] * xp);
    for (int q = 0; q < fs.m; ++q) {
      if (q == p) continue;
      mom -= fs.ks[p][q] * fup[q];
      if (fs.kd[p][q].size()) mom -= bdt * (fs.kd[p][q] * xup[q]);
    }
    if (fs.ws) {
      for (int c = 0; c < fs.wall_comps(); ++c)
        mom -= fs.kwv[p][c] * etaup[c];
      for (int q = 0; q < static_cast<int>(fs.cwv[p].size()); ++q)
        mom -= fs.cwv[p][q] * v.segment(lay.lam_off + 3 * q, 3);
    }
    out.segment(o, 2 * n) = mom;
    out.segment(o + 2 * n, n) = fs.beta * (fs.divm[p] * xp);
  }

  if (fs.ws) {
    VectorXd wall_in(fs.ws->dofs);
    for (int c = 0; c < fs.wall_comps(); ++c)
      wall_in.segment(fs.ws->off[c], 2 * lay.wall_n[c]) =
          v.segment(lay.wall_off[c], 2 * lay.wall_n[c]);
    wall_in.tail(3 * fs.ws->set.holes()) =
        v.segment(lay.lam_off, 3 * fs.ws->set.holes());
    VectorXd wall_out = fs.ws->op * wall_in;
    for (int c = 0; c < fs.wall_comps(); ++c) {
      VectorXd seg = wall_out.segment(fs.ws->off[c], 2 * lay.wall_n[c]);
      for (int q = 0; q < fs.m; ++q) {
        seg += fs.kvws[c][q] * fup[q];
        if (fs.kvwd[c][q].size()) seg += bdt * (fs.kvwd[c][q] * xup[q]);
      }
      out.segment(lay.wall_off[c], 2 * lay.wall_n[c]) = seg;
    }
    out.segment(lay.lam_off, 3 * fs.ws->set.holes()) =
        wall_out.tail(3 * fs.ws->set.holes());
  }
  return out;
}

VectorXd frozen_rhs(const FrozenSystem& fs) { return fs.rhs; }

VectorXd frozen_precondition(const FrozenSystem& fs, const VectorXd& v) {
  VectorXd out = VectorXd::Zero(fs.lay.total);
  for (int p = 0; p < fs.m; ++p) {
    const int n = fs.n[p], o = fs.lay.ves_off[p];
    out.segment(o, 3 * n) = fs.plu[p].solve(v.segment(o, 3 * n));
  }
  if (fs.ws) {
    VectorXd wall_in(fs.ws->dofs);
    for (int c = 0; c < fs.wall_comps(); ++c)
      wall_in.segment(fs.ws->off[c], 2 * fs.lay.wall_n[c]) =
          v.segment(fs.lay.wall_off[c], 2 * fs.lay.wall_n[c]);
    wall_in.tail(3 * fs.ws->set.holes()) =
        v.segment(fs.lay.lam_off, 3 * fs.ws->set.holes());
    VectorXd sol = fs.ws->lu.solve(wall_in);
    for (int c = 0; c < fs.wall_comps(); ++c)
      out.segment(fs.lay.wall_off[c], 2 * fs.lay.wall_n[c]) =
          sol.segment(fs.ws->off[c], 2 * fs.lay.wall_n[c]);
    out.segment(fs.lay.lam_off, 3 * fs.ws->set.holes()) =
        sol.tail(3 * fs.ws->set.holes());
  }
  return out;
}

Layout frozen_layout(const FrozenSystem& fs) { return fs.lay; }

namespace {

void commit_solution(SystemState& state, const FrozenSystem& fs,
                     const VectorXd& sol) {
  const Layout& lay = fs.lay;
  std::vector<Matrix2Xd> old_x;
  for (const Vesicle& v : state.vesicles) old_x.push_back(v.curve.x);
  for (int p = 0; p < fs.m; ++p) {
    const int n = fs.n[p], o = lay.ves_off[p];
    Matrix2Xd xn = unstack_xy(sol.segment(o, 2 * n));
    Vesicle next(Curve(xn), state.vesicles[p].nu, state.vesicles[p].kappa);
    next.sigma = sol.segment(o + 2 * n, n);
    state.vesicles[p] = std::move(next);
  }
  if (state.u_prev.empty()) state.u_prev.resize(fs.m);
  for (int p = 0; p < fs.m; ++p) {
    state.u_prev[p] =
        (fs.beta * state.vesicles[p].curve.x - fs.x0[p]) / fs.cfg.dt;
  }
  state.x_prev = std::move(old_x);
  state.have_history = true;
  if (fs.ws) {
    state.eta.resize(fs.wall_comps());
    for (int c = 0; c < fs.wall_comps(); ++c)
      state.eta[c] =
          unstack_xy(sol.segment(lay.wall_off[c], 2 * lay.wall_n[c]));
    state.lambda.resize(fs.ws->set.holes());
    state.xi.resize(fs.ws->set.holes());
    for (int q = 0; q < fs.ws->set.holes(); ++q) {
      state.lambda[q] = sol.segment(lay.lam_off + 3 * q, 2);
      state.xi[q] = sol[lay.lam_off + 3 * q + 2];
    }
  }
  state.t += fs.cfg.dt;
  ++state.step;
}

StepStats explicit_step(SystemState& state, const FrozenSystem& fs) {
  StepStats stats;
  const Layout& lay = fs.lay;
  const double idt = 1.0 / fs.cfg.dt;

  // interactions use the current tractions and velocities
  std::vector<VectorXd> fup(fs.m), uup(fs.m);
  for (int q = 0; q < fs.m; ++q) {
    Matrix2Xd fq = traction_jump(state.vesicles[q]);
    fup[q] = upsampled_stack(fq, fs.nup[q]);
    Matrix2Xd uq = q < static_cast<int>(state.u_prev.size()) &&
                           state.u_prev[q].size()
                       ? state.u_prev[q]
                       : Matrix2Xd::Zero(2, fs.n[q]);
    uup[q] = upsampled_stack(uq, fs.nup[q]);
  }

  VectorXd wall_sol;
  if (fs.ws) {
    VectorXd wrhs = fs.ws->boundary_rhs();
    for (int c = 0; c < fs.wall_comps(); ++c) {
      VectorXd seg = wrhs.segment(fs.ws->off[c], 2 * lay.wall_n[c]);
      for (int q = 0; q < fs.m; ++q) {
        seg -= fs.kvws[c][q] * fup[q];
        if (fs.kvwd[c][q].size()) seg -= fs.kvwd[c][q] * uup[q];
      }
      wrhs.segment(fs.ws->off[c], 2 * lay.wall_n[c]) = seg;
    }
    wall_sol = fs.ws->lu.solve(wrhs);
    stats.gmres_iters = 0;
  }

  VectorXd sol = VectorXd::Zero(lay.total);
  for (int p = 0; p < fs.m; ++p) {
    const int n = fs.n[p], o = lay.ves_off[p];
    VectorXd x0s = stack_xy(fs.x0[p]);
    VectorXd mom = fs.alpha[p] * idt * x0s + stack_xy(fs.uinf[p]);
    if (fs.dlp[p].size()) mom -= idt * (fs.dlp[p] * x0s);
    for (int q = 0; q < fs.m; ++q) {
      if (q == p) continue;
      mom += fs.ks[p][q] * fup[q];
      if (fs.kd[p][q].size()) mom += fs.kd[p][q] * uup[q];
    }
    if (fs.ws) {
      for (int c = 0; c < fs.wall_comps(); ++c) {
        Matrix2Xd eta = unstack_xy(
            wall_sol.segment(fs.ws->off[c], 2 * lay.wall_n[c]));
        mom += fs.kwv[p][c] * upsampled_stack(eta, fs.ws->up[c].n());
      }
      for (int q = 0; q < static_cast<int>(fs.cwv[p].size()); ++q)
        mom += fs.cwv[p][q] * wall_sol.segment(fs.ws->lam_off + 3 * q, 3);
    }
    VectorXd rhs(3 * n);
    rhs.head(2 * n) = mom;
    rhs.tail(n) = fs.divm[p] * x0s;
    sol.segment(o, 3 * n) = vesicle_block_solve(fs, p, rhs);
  }
  if (fs.ws) {
    for (int c = 0; c < fs.wall_comps(); ++c)
      sol.segment(lay.wall_off[c], 2 * lay.wall_n[c]) =
          wall_sol.segment(fs.ws->off[c], 2 * lay.wall_n[c]);
    sol.segment(lay.lam_off, 3 * fs.ws->set.holes()) =
        wall_sol.tail(3 * fs.ws->set.holes());
  }
  commit_solution(state, fs, sol);
  return stats;
}

StepStats implicit_step(SystemState& state, const FrozenSystem& fs) {
  StepStats stats;
  LinOp apply = [&fs](const VectorXd& v) { return frozen_apply(fs, v); };
  LinOp precond;
  if (fs.cfg.precondition)
    precond = [&fs](const VectorXd& v) { return frozen_precondition(fs, v); };
  GmresResult res = gmres(apply, precond, fs.rhs, fs.cfg.gmres_tol,
                          fs.cfg.gmres_maxit);
  stats.gmres_iters = res.iters;
  stats.residual = res.relres;
  stats.converged = res.converged;
  stats.residual_history = res.history;
  commit_solution(state, fs, res.x);
  return stats;
}

}  // namespace

StepStats take_step(SystemState& state, const SchemeConfig& cfg,
                    const WallStatic* ws, const BackgroundFlow& flow) {
  auto fs = freeze_system(state, cfg, ws, flow);
  return cfg.semi_implicit ? implicit_step(state, *fs)
                           : explicit_step(state, *fs);
}

}  // namespace vesflow
