#include "vesflow/sim.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace vesflow {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool is_pow2(long v) { return v >= 8 && (v & (v - 1)) == 0; }

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

// collects every field-level problem; the value parsers return false
// instead of throwing so one pass reports all of them
struct FieldErrors {
  std::vector<std::string> items;
  void add(const std::string& section, const std::string& key,
           const std::string& what) {
    items.push_back("[" + section + "] " + key + ": " + what);
  }
};

bool to_double(const std::string& v, double& out) {
  try {
    size_t used = 0;
    out = std::stod(v, &used);
    return used == v.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

bool to_long(const std::string& v, long& out) {
  try {
    size_t used = 0;
    out = std::stol(v, &used);
    return used == v.size();
  } catch (...) {
    return false;
  }
}

bool to_u64(const std::string& v, std::uint64_t& out) {
  try {
    size_t used = 0;
    out = std::stoull(v, &used);
    return used == v.size() && v.find('-') == std::string::npos;
  } catch (...) {
    return false;
  }
}

bool to_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "yes") return out = true, true;
  if (v == "false" || v == "0" || v == "no") return out = false, true;
  return false;
}

}  // namespace

RunConfig parse_run_config(std::istream& in, const std::string& name) {
  RunConfig cfg;
  FieldErrors err;
  std::string line, section;
  int lineno = 0;

  auto want_double = [&](const std::string& key, const std::string& v,
                         double& dst, double lo, bool open_lo = false) {
    double d;
    if (!to_double(v, d))
      err.add(section, key, "not a number: '" + v + "'");
    else if (d < lo || (open_lo && d <= lo))
      err.add(section, key, "must be " + std::string(open_lo ? "> " : ">= ") +
                                fmt(lo) + ", got " + v);
    else
      dst = d;
  };
  auto want_int = [&](const std::string& key, const std::string& v, int& dst,
                      long lo) {
    long l;
    if (!to_long(v, l))
      err.add(section, key, "not an integer: '" + v + "'");
    else if (l < lo)
      err.add(section, key, "must be >= " + std::to_string(lo));
    else
      dst = static_cast<int>(l);
  };
  auto want_pow2 = [&](const std::string& key, const std::string& v,
                       int& dst) {
    long l;
    if (!to_long(v, l) || !is_pow2(l))
      err.add(section, key, "must be a power of two >= 8, got '" + v + "'");
    else
      dst = static_cast<int>(l);
  };
  auto want_bool = [&](const std::string& key, const std::string& v,
                       bool& dst) {
    if (!to_bool(v, dst)) err.add(section, key, "not a boolean: '" + v + "'");
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        err.items.push_back(name + ":" + std::to_string(lineno) +
                            ": malformed section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "scenario" && section != "discretization" &&
          section != "scheme" && section != "output")
        err.items.push_back(name + ":" + std::to_string(lineno) +
                            ": unknown section [" + section + "]");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      err.items.push_back(name + ":" + std::to_string(lineno) +
                          ": expected 'key = value', got '" + line + "'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) {
      err.items.push_back(name + ":" + std::to_string(lineno) +
                          ": empty key or value");
      continue;
    }

    if (section == "scenario") {
      if (key == "flow") {
        try {
          cfg.scenario.kind = parse_flow_kind(val);
        } catch (const std::exception& e) {
          err.add(section, key, e.what());
        }
      } else if (key == "vesicles") {
        want_int(key, val, cfg.scenario.vesicles, 1);
      } else if (key == "reduced_area") {
        double ra = cfg.scenario.reduced_area;
        want_double(key, val, ra, 0.0, true);
        if (ra > 1.0)
          err.add(section, key, "must be in (0, 1], got " + val);
        else
          cfg.scenario.reduced_area = ra;
      } else if (key == "viscosity_contrast") {
        want_double(key, val, cfg.scenario.nu, 0.0, true);
      } else if (key == "bending_modulus") {
        want_double(key, val, cfg.scenario.kappa, 0.0, true);
      } else if (key == "flow_rate") {
        double r;
        if (!to_double(val, r))
          err.add(section, key, "not a number: '" + val + "'");
        else
          cfg.scenario.flow_rate = r;
      } else if (key == "vesicle_scale") {
        want_double(key, val, cfg.scenario.vesicle_scale, 0.0, true);
      } else if (key == "tg_gap") {
        want_double(key, val, cfg.scenario.tg_gap, 0.0, false);
      } else if (key == "seed") {
        std::uint64_t s;
        if (!to_u64(val, s))
          err.add(section, key, "not an unsigned integer: '" + val + "'");
        else
          cfg.scenario.seed = s;
      } else {
        err.add(section, key, "unknown key");
      }
    } else if (section == "discretization") {
      if (key == "n")
        want_pow2(key, val, cfg.scenario.n);
      else if (key == "wall_n")
        want_pow2(key, val, cfg.scenario.wall_n);
      else
        err.add(section, key, "unknown key");
    } else if (section == "scheme") {
      if (key == "order") {
        long o;
        if (!to_long(val, o) || (o != 1 && o != 2))
          err.add(section, key, "must be 1 or 2, got '" + val + "'");
        else
          cfg.scheme.order = static_cast<int>(o);
      } else if (key == "coupling") {
        if (val == "semi_implicit")
          cfg.scheme.semi_implicit = true;
        else if (val == "explicit")
          cfg.scheme.semi_implicit = false;
        else
          err.add(section, key,
                  "must be 'explicit' or 'semi_implicit', got '" + val + "'");
      } else if (key == "dt") {
        want_double(key, val, cfg.scheme.dt, 0.0, true);
      } else if (key == "time_horizon") {
        want_double(key, val, cfg.horizon, 0.0, true);
      } else if (key == "gmres_tol") {
        want_double(key, val, cfg.scheme.gmres_tol, 0.0, true);
      } else if (key == "gmres_max_iterations") {
        want_int(key, val, cfg.scheme.gmres_maxit, 1);
      } else if (key == "precondition") {
        want_bool(key, val, cfg.scheme.precondition);
      } else if (key == "near_singular") {
        want_bool(key, val, cfg.scheme.near_singular);
      } else if (key == "dt_floor") {
        want_double(key, val, cfg.dt_floor, 0.0, true);
      } else {
        err.add(section, key, "unknown key");
      }
    } else if (section == "output") {
      if (key == "directory")
        cfg.output.directory = val;
      else if (key == "snapshot_every")
        want_int(key, val, cfg.output.snapshot_every, 0);
      else
        err.add(section, key, "unknown key");
    } else {
      err.items.push_back(name + ":" + std::to_string(lineno) +
                          ": key '" + key + "' outside any known section");
    }
  }

  if (cfg.dt_floor > cfg.scheme.dt)
    err.add("scheme", "dt_floor",
            "exceeds dt (" + fmt(cfg.dt_floor) + " > " + fmt(cfg.scheme.dt) +
                ")");
  if (cfg.horizon < cfg.scheme.dt)
    err.add("scheme", "time_horizon",
            "shorter than one step (" + fmt(cfg.horizon) + " < " +
                fmt(cfg.scheme.dt) + ")");

  if (!err.items.empty()) {
    std::string msg = "invalid configuration (" + name + "):";
    for (const std::string& e : err.items) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  return parse_run_config(f, path);
}

std::string diagnostics_line(const DiagnosticsRecord& r) {
  auto num = [](double v) {
    return std::isfinite(v) ? fmt(v) : std::string("null");
  };
  std::string s = "{\"step\":" + std::to_string(r.step);
  s += ",\"t\":" + num(r.t);
  s += ",\"dt\":" + num(r.dt);
  s += ",\"e_A\":" + num(r.e_area);
  s += ",\"e_L\":" + num(r.e_length);
  s += ",\"gmres_iters\":" + std::to_string(r.gmres_iters);
  s += ",\"min_gap_vesicle\":" + num(r.min_gap_vesicle);
  s += ",\"min_gap_wall\":" + num(r.min_gap_wall);
  s += ",\"collision_events\":" + std::to_string(r.collision_events);
  s += "}";
  return s;
}

void write_snapshot(const SystemState& s, double dt,
                    const std::string& csv_path,
                    const std::string& manifest_path) {
  std::ofstream f(csv_path);
  if (!f) throw std::runtime_error("cannot write snapshot: " + csv_path);
  f << "body_id,kind,node,x,y,sigma_or_eta\n";
  int body = 0;
  for (const Vesicle& v : s.vesicles) {
    for (int j = 0; j < v.n(); ++j) {
      const double sig = v.sigma.size() ? v.sigma[j] : 0.0;
      f << body << ",vesicle," << j << ',' << fmt(v.curve.x(0, j)) << ','
        << fmt(v.curve.x(1, j)) << ',' << fmt(sig) << '\n';
    }
    ++body;
  }
  for (const WallComponent& w : s.walls.comps) {
    for (int j = 0; j < w.n(); ++j)
      f << body << ",wall," << j << ',' << fmt(w.curve.x(0, j)) << ','
        << fmt(w.curve.x(1, j)) << ",0\n";
    ++body;
  }
  std::ofstream m(manifest_path);
  if (!m) throw std::runtime_error("cannot write manifest: " + manifest_path);
  m << "{\"time\":" << fmt(s.t) << ",\"dt\":" << fmt(dt)
    << ",\"step\":" << s.step << "}\n";
}

SystemState read_snapshot(const std::string& csv_path) {
  std::ifstream f(csv_path);
  if (!f) throw std::runtime_error("cannot open snapshot: " + csv_path);
  std::string line;
  if (!std::getline(f, line) || trim(line).empty())
    throw std::runtime_error("empty snapshot: " + csv_path);
  if (line.rfind("body_id,kind,node,x,y", 0) != 0)
    throw std::runtime_error("snapshot header mismatch: " + csv_path);

  struct Body {
    std::string kind;
    std::vector<double> x, y, extra;
  };
  std::map<int, Body> bodies;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field[6];
    for (int k = 0; k < 6; ++k)
      if (!std::getline(row, field[k], ','))
        throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                 ": expected 6 comma-separated fields");
    long id, node;
    double x, y, extra;
    if (!to_long(field[0], id) || !to_long(field[2], node) ||
        !to_double(field[3], x) || !to_double(field[4], y) ||
        !to_double(field[5], extra))
      throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                               ": malformed row");
    Body& b = bodies[static_cast<int>(id)];
    if (b.kind.empty())
      b.kind = field[1];
    else if (b.kind != field[1])
      throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                               ": body changes kind");
    if (node != static_cast<long>(b.x.size()))
      throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                               ": nodes out of order");
    b.x.push_back(x);
    b.y.push_back(y);
    b.extra.push_back(extra);
  }
  if (bodies.empty())
    throw std::runtime_error("snapshot has no rows: " + csv_path);

  SystemState s;
  std::vector<Curve> wall_curves;
  for (auto& [id, b] : bodies) {
    Matrix2Xd pts(2, static_cast<int>(b.x.size()));
    for (int j = 0; j < pts.cols(); ++j) pts.col(j) = Vector2d(b.x[j], b.y[j]);
    if (b.kind == "vesicle") {
      Vesicle v{Curve(pts)};
      v.sigma = Eigen::Map<const VectorXd>(b.extra.data(),
                                           static_cast<long>(b.extra.size()));
      s.vesicles.push_back(std::move(v));
    } else if (b.kind == "wall") {
      wall_curves.emplace_back(pts);
    } else {
      throw std::runtime_error("unknown body kind '" + b.kind + "' in " +
                               csv_path);
    }
  }
  if (!wall_curves.empty()) {
    // largest bounding box encloses the rest
    int outer = 0;
    double best = -1.0;
    for (size_t c = 0; c < wall_curves.size(); ++c) {
      const auto& x = wall_curves[c].x;
      const double area = (x.row(0).maxCoeff() - x.row(0).minCoeff()) *
                          (x.row(1).maxCoeff() - x.row(1).minCoeff());
      if (area > best) best = area, outer = static_cast<int>(c);
    }
    s.walls.comps.emplace_back(wall_curves[outer], true);
    for (size_t c = 0; c < wall_curves.size(); ++c)
      if (static_cast<int>(c) != outer)
        s.walls.comps.emplace_back(wall_curves[c], false);
  }
  return s;
}

namespace {

std::string snapshot_stem(const std::string& dir, long step) {
  char b[32];
  std::snprintf(b, sizeof b, "snap_%06ld", step);
  return dir + "/" + b;
}

void dump_first_system(const RunConfig& cfg, const Scenario& sc,
                       const WallStatic* ws, const std::string& dir) {
  auto fs = freeze_system(sc.state, cfg.scheme, ws, sc.flow);
  const Layout lay = frozen_layout(*fs);
  std::ofstream mf(dir + "/matrix.csv");
  std::ofstream rf(dir + "/rhs.csv");
  if (!mf || !rf)
    throw std::runtime_error("cannot write linear system dump in " + dir);
  VectorXd e = VectorXd::Zero(lay.total);
  MatrixXd a(lay.total, lay.total);
  for (int j = 0; j < lay.total; ++j) {
    e[j] = 1.0;
    a.col(j) = frozen_apply(*fs, e);
    e[j] = 0.0;
  }
  for (int i = 0; i < lay.total; ++i) {
    for (int j = 0; j < lay.total; ++j)
      mf << fmt(a(i, j)) << (j + 1 < lay.total ? "," : "\n");
  }
  VectorXd b = frozen_rhs(*fs);
  for (int i = 0; i < lay.total; ++i) rf << fmt(b[i]) << '\n';
}

}  // namespace

RunResult simulate(const RunConfig& cfg,
                   const std::optional<std::string>& out_dir) {
  Scenario sc = build_scenario(cfg.scenario);
  SystemState& state = sc.state;
  SchemeConfig scheme = cfg.scheme;

  std::unique_ptr<WallStatic> ws;
  if (!state.walls.empty()) ws = build_wall_static(state.walls, scheme.mu0);

  std::ofstream diag;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    diag.open(*out_dir + "/diagnostics.jsonl");
    if (!diag)
      throw std::runtime_error("cannot write diagnostics in " + *out_dir);
    write_snapshot(state, scheme.dt, snapshot_stem(*out_dir, 0) + ".csv",
                   snapshot_stem(*out_dir, 0) + ".json");
    if (cfg.dump_linear_system)
      dump_first_system(cfg, sc, ws.get(), *out_dir);
  }

  std::vector<double> area0, len0;
  for (const Vesicle& v : state.vesicles) {
    area0.push_back(v.geom.area);
    len0.push_back(v.geom.length);
  }
  auto shape_errors = [&](double& ea, double& el) {
    ea = el = 0.0;
    for (size_t p = 0; p < state.vesicles.size(); ++p) {
      const GeometryCache& g = state.vesicles[p].geom;
      ea = std::max(ea, std::abs(g.area - area0[p]) / area0[p]);
      el = std::max(el, std::abs(g.length - len0[p]) / len0[p]);
    }
  };

  RollbackPolicy policy(scheme.order, cfg.dt_floor);
  SystemState checkpoint = state;
  RunResult res;
  long accepted = 0;

  while (state.t < cfg.horizon - 0.5 * scheme.dt) {
    bool rejected = false;
    std::string why;
    StepStats stats;
    try {
      stats = take_step(state, scheme, ws.get(), sc.flow);
    } catch (const StencilCrossesWall& e) {
      rejected = true;
      why = std::string("wall stencil failure: ") + e.what();
    }

    if (!rejected) {
      CollisionReport rep = detect_collisions(state);
      if (!stats.converged) {
        rejected = true;
        why = "GMRES stalled (residual " + fmt(stats.residual) + ")";
      } else if (rep.collided) {
        rejected = true;
        why = "collision (" + std::to_string(rep.events.size()) +
              " nodes, max deviation " + fmt(rep.max_deviation) + ")";
      }
      // one record per accepted step; rejected attempts only surface when
      // the detector fired (collision_events > 0 marks them)
      if (!rejected || rep.collided) {
        DiagnosticsRecord r;
        r.step = state.step;
        r.t = state.t;
        r.dt = scheme.dt;
        shape_errors(r.e_area, r.e_length);
        r.gmres_iters = stats.gmres_iters;
        GapReport gaps = minimum_gaps(state);
        r.min_gap_vesicle = gaps.vesicle;
        r.min_gap_wall = gaps.wall;
        r.collision_events =
            rep.collided ? static_cast<int>(rep.events.size()) : 0;
        res.diag.push_back(r);
        if (diag.is_open()) diag << diagnostics_line(r) << '\n';
      }
    }

    if (rejected) {
      state = checkpoint;
      if (!(scheme.dt * 0.5 > policy.floor_value() * (1.0 - 1e-12))) {
        res.exit_code = 3;
        res.message = "aborted at t = " + fmt(state.t) + ": " + why +
                      "; dt floor " + fmt(policy.floor_value()) + " reached";
        break;
      }
      scheme.dt *= 0.5;
      state.reset_history();
      ++res.rollbacks;
      continue;
    }

    ++accepted;
    if (policy.should_checkpoint(accepted)) checkpoint = state;
    if (out_dir && cfg.output.snapshot_every > 0 &&
        accepted % cfg.output.snapshot_every == 0)
      write_snapshot(state, scheme.dt,
                     snapshot_stem(*out_dir, state.step) + ".csv",
                     snapshot_stem(*out_dir, state.step) + ".json");
  }

  if (res.exit_code == 0)
    res.message = "horizon reached at t = " + fmt(state.t) + " (" +
                  std::to_string(accepted) + " steps, " +
                  std::to_string(res.rollbacks) + " rollbacks)";
  if (out_dir)
    write_snapshot(state, scheme.dt,
                   snapshot_stem(*out_dir, state.step) + ".csv",
                   snapshot_stem(*out_dir, state.step) + ".json");
  res.state = std::move(state);
  return res;
}

ConvergenceTable run_convergence(const RunConfig& base, int levels) {
  if (levels < 2)
    throw std::invalid_argument("convergence study needs at least 2 levels");

  ConvergenceTable tab;
  std::vector<std::vector<double>> gap_series(levels);
  for (int l = 0; l < levels; ++l) {
    RunConfig cfg = base;
    cfg.scenario.n = base.scenario.n << l;
    cfg.scheme.dt = base.scheme.dt / double(1 << l);
    ConvergenceLevel lev;
    lev.n = cfg.scenario.n;
    lev.dt = cfg.scheme.dt;
    try {
      RunResult r = simulate(cfg);
      if (r.exit_code != 0) throw std::runtime_error(r.message);
      for (const DiagnosticsRecord& d : r.diag) {
        if (d.collision_events != 0) continue;
        lev.e_area = d.e_area;
        lev.e_length = d.e_length;
        gap_series[l].push_back(d.min_gap_vesicle);
      }
      if (r.rollbacks > 0) gap_series[l].clear();  // grid shifted; no overlay
      lev.completed = true;
      tab.levels.push_back(lev);
    } catch (const std::exception&) {
      tab.levels.push_back(lev);
      break;
    }
  }
  tab.all_completed = static_cast<int>(tab.levels.size()) == levels &&
                      tab.levels.back().completed;

  // fitted orders: slope of log e against log dt over completed levels
  auto fit = [&](auto value) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (const ConvergenceLevel& lev : tab.levels) {
      if (!lev.completed) continue;
      const double x = std::log(lev.dt);
      const double y = std::log(std::max(value(lev), 1e-300));
      sx += x, sy += y, sxx += x * x, sxy += x * y, ++m;
    }
    if (m < 2) return 0.0;
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
  };
  tab.order_area = fit([](const ConvergenceLevel& l) { return l.e_area; });
  tab.order_length = fit([](const ConvergenceLevel& l) { return l.e_length; });

  // minimum-gap curves against the finest completed level on the coarse grid
  int finest = -1;
  for (int l = 0; l < static_cast<int>(tab.levels.size()); ++l)
    if (tab.levels[l].completed && !gap_series[l].empty()) finest = l;
  if (finest >= 0) {
    const std::vector<double>& ref = gap_series[finest];
    for (int l = 0; l <= finest; ++l) {
      if (gap_series[l].empty()) continue;
      const size_t coarse = gap_series[0].empty() ? gap_series[l].size()
                                                  : gap_series[0].size();
      const size_t stride_l = size_t(1) << l;
      const size_t stride_f = size_t(1) << finest;
      if (gap_series[l].size() != coarse * stride_l ||
          ref.size() != coarse * stride_f)
        continue;
      double dev = std::numeric_limits<double>::quiet_NaN();
      for (size_t k = 0; k < coarse; ++k) {
        const double a = gap_series[l][(k + 1) * stride_l - 1];
        const double b = ref[(k + 1) * stride_f - 1];
        if (!std::isfinite(a) || !std::isfinite(b)) continue;
        const double d = std::abs(a - b);
        dev = std::isnan(dev) ? d : std::max(dev, d);
      }
      tab.levels[l].gap_dev = dev;
    }
  }
  return tab;
}

void write_convergence_csv(const ConvergenceTable& t, std::ostream& out) {
  out << "level,n,dt,e_A,e_L,gap_dev_vs_finest\n";
  for (size_t l = 0; l < t.levels.size(); ++l) {
    const ConvergenceLevel& lev = t.levels[l];
    out << l << ',' << lev.n << ',' << fmt(lev.dt) << ',';
    if (lev.completed) {
      out << fmt(lev.e_area) << ',' << fmt(lev.e_length) << ',';
      if (std::isfinite(lev.gap_dev)) out << fmt(lev.gap_dev);
    } else {
      out << ",,";
    }
    out << '\n';
  }
  out << "# fitted_order_e_A = " << fmt(t.order_area) << '\n';
  out << "# fitted_order_e_L = " << fmt(t.order_length) << '\n';
}

}  // namespace vesflow
