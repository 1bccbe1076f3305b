#pragma once

#include <cstdint>
#include <string>

#include "vesflow/collision.hpp"

// Canned experiment setups: background velocity fields, wall geometries
// with their velocity programs, and non-overlapping initial vesicle
// placements. Unconfined presets drive the flow through the background
// field; confined presets drive it entirely through the wall velocities.

namespace vesflow {

enum class FlowKind {
  Relaxation,   // quiescent, single vesicle by default
  Shear,        // u = rate * (y, 0), two vesicles
  Extensional,  // u = rate * (-x, y), symmetric pair
  TaylorGreen,  // u = rate * (sin x cos y, -cos x sin y), 3x3 grid
  Couette,      // rotating inner cylinder, seeded suspension
  Stenosis,     // constricted tube, Gaussian intake/outtake
};

FlowKind parse_flow_kind(const std::string& name);  // throws on unknown
std::string flow_kind_name(FlowKind kind);
bool is_confined(FlowKind kind);

struct ScenarioConfig {
  FlowKind kind = FlowKind::Relaxation;
  int n = 64;              // nodes per vesicle
  int vesicles = -1;       // -1: preset default count
  int wall_n = -1;         // -1: preset default (couette 128, stenosis 256)
  double reduced_area = 0.65;
  double nu = 1.0;
  double kappa = 0.1;
  double flow_rate = 1.0;  // multiplies the background field
  double vesicle_scale = 1.0;  // perimeter / (2 pi)

  // shear: left vesicle center (-separation, offset), right at origin
  double shear_offset = 0.4;
  double shear_separation = 3.0;
  // extensional: centers at (+-separation, 0)
  double ext_separation = 2.4;
  // taylor-green: starting gap of the pair straddling (pi, pi);
  // 0 = tightest admissible (1.15 mesh spacings)
  double tg_gap = 0.0;
  // couette geometry; the inner wall completes a revolution per `period`
  double couette_r_in = 10.0;
  double couette_r_out = 20.0;
  double couette_period = 10.0;
  // stenosis intake/outtake velocity: amplitude and Gaussian width,
  // sized so one transit of the constriction fits a horizon of ~8
  double sten_amplitude = 1.2;
  double sten_width = 1.5;
  // vesicle height relative to the constriction opening
  double sten_height_factor = 2.3;

  std::uint64_t seed = 20260815;  // random placements (couette)
};

struct Scenario {
  ScenarioConfig cfg;
  SystemState state;      // vesicles placed, walls with velocity programs
  BackgroundFlow flow;    // null for confined and relaxation presets
};

// Background field of an unconfined preset; throws for confined kinds.
Matrix2Xd background_velocity(const ScenarioConfig& cfg, const Matrix2Xd& points);

// Wall geometry + velocity program of a confined preset; throws for
// unconfined kinds, non-power-of-two sizes, or a stenosis under 256.
WallSet wall_geometry(const ScenarioConfig& cfg);

// Full initial state. Placements are validated: the collision detector
// must stay quiet and every inter-body gap must exceed the mesh spacing.
Scenario build_scenario(const ScenarioConfig& cfg);

// Stenosis wall point at parameter theta (exposed for tests).
Vector2d stenosis_point(double theta);

}  // namespace vesflow
