#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vesflow/scenarios.hpp"

// Driver layer: run configuration files, the checkpoint/rollback time
// loop, and the artifact formats (snapshot CSVs, JSON-lines diagnostics,
// convergence tables).

namespace vesflow {

struct OutputConfig {
  std::string directory = "out";
  int snapshot_every = 0;  // accepted steps between snapshots; 0 = first/last
};

struct RunConfig {
  ScenarioConfig scenario;
  SchemeConfig scheme;
  double horizon = 1.0;    // simulated time to reach
  double dt_floor = 1e-6;  // rollback halving aborts below this
  bool dump_linear_system = false;
  OutputConfig output;
};

// Sectioned `key = value` text with sections [scenario], [discretization],
// [scheme] and [output]; '#' and ';' start comments. Every unknown key,
// unparsable value and out-of-range field is collected before throwing,
// so the message names all offending fields at once.
RunConfig parse_run_config(std::istream& in,
                           const std::string& name = "config");
RunConfig load_run_config(const std::string& path);

struct DiagnosticsRecord {
  long step = 0;
  double t = 0.0;
  double dt = 0.0;
  double e_area = 0.0;    // max over vesicles of |A - A(0)| / A(0)
  double e_length = 0.0;  // max over vesicles of |L - L(0)| / L(0)
  int gmres_iters = 0;
  double min_gap_vesicle = std::numeric_limits<double>::infinity();
  double min_gap_wall = std::numeric_limits<double>::infinity();
  int collision_events = 0;  // nonzero only on rejected (rolled back) steps
};

// One JSON object per record, keys {step, t, dt, e_A, e_L, gmres_iters,
// min_gap_vesicle, min_gap_wall, collision_events}; infinities are null.
std::string diagnostics_line(const DiagnosticsRecord& r);

struct RunResult {
  int exit_code = 0;  // 0 horizon reached; 3 dt-floor abort
  std::string message;
  SystemState state;                    // end of the run
  std::vector<DiagnosticsRecord> diag;  // accepted and rejected steps
  long rollbacks = 0;
};

// Executes the time loop: step, collision check, and on a rejected step
// (collision, stalled GMRES, wall stencil failure) restore the newest
// checkpoint, halve dt and clear the extrapolation history; dt under the
// floor aborts with exit code 3. With an output directory set, writes
// diagnostics.jsonl and snap_XXXXXX.{csv,json}; a null directory runs in
// memory only.
RunResult simulate(const RunConfig& cfg,
                   const std::optional<std::string>& out_dir = std::nullopt);

// Snapshot round trip. CSV rows `body_id,kind,node,x,y,sigma_or_eta` with
// kind vesicle|wall (walls store 0 in the last column); the manifest JSON
// carries {time, dt, step}. Reading rebuilds curves and tensions; wall
// velocity programs are not stored, so reread walls are static and the
// largest bounding box picks the outer component.
void write_snapshot(const SystemState& s, double dt,
                    const std::string& csv_path,
                    const std::string& manifest_path);
SystemState read_snapshot(const std::string& csv_path);

struct ConvergenceLevel {
  int n = 0;
  double dt = 0.0;
  double e_area = 0.0;
  double e_length = 0.0;
  // max deviation of the minimum-gap curve from the finest level's on the
  // shared coarse time grid; NaN when gaps are undefined or grids differ
  double gap_dev = std::numeric_limits<double>::quiet_NaN();
  bool completed = false;
};

struct ConvergenceTable {
  std::vector<ConvergenceLevel> levels;
  double order_area = 0.0;    // least-squares slope of log e vs log dt
  double order_length = 0.0;
  bool all_completed = false;
};

// Runs `levels` refinements (N, dt), (2N, dt/2), ...; a failing level
// leaves the table partial (completed = false from that level on).
ConvergenceTable run_convergence(const RunConfig& base, int levels);
void write_convergence_csv(const ConvergenceTable& t, std::ostream& out);

}  // namespace vesflow
