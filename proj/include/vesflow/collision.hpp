#pragma once

#include "vesflow/evolve.hpp"

// Collision detection via the characteristic (winding) indicator. Every
// vesicle node x carries I(x) = sum over all other closed curves of the
// indicator potential of a unit density. Away from contact the value is
// 1/2 (the node's own curve) plus 1 inside the wall region when confined;
// crossings push it off by roughly +/-1 in the overlapped region.

namespace vesflow {

struct CollisionEvent {
  int vesicle = 0;
  int node = 0;
  double indicator = 0.0;  // observed total
  double expected = 0.0;
};

struct CollisionReport {
  bool collided = false;
  double max_deviation = 0.0;
  std::vector<CollisionEvent> events;  // offending nodes
};

// Indicator totals at every vesicle node, one column per vesicle node in
// vesicle order. Uses near-zone interpolation against other bodies closer
// than their mesh spacing.
std::vector<VectorXd> indicator_field(const SystemState& state);

// Flags any node whose indicator deviates from the expected constant by
// more than `tol` (two-sided).
CollisionReport detect_collisions(const SystemState& state, double tol = 0.25);

// Minimum gaps for diagnostics: vesicle-vesicle and vesicle-wall closest
// distances (infinity when absent).
struct GapReport {
  double vesicle = std::numeric_limits<double>::infinity();
  double wall = std::numeric_limits<double>::infinity();
};
GapReport minimum_gaps(const SystemState& state);

// dt-halving rollback bookkeeping: checkpoints every step (order 1) or
// every other step (order 2); a collision restores the newest checkpoint,
// halves dt and clears the extrapolation history; dt below the floor
// aborts the run.
class RollbackPolicy {
 public:
  RollbackPolicy(int order, double dt_floor) : order_(order), floor_(dt_floor) {}
  int checkpoint_interval() const { return order_ == 2 ? 2 : 1; }
  bool should_checkpoint(long step) const {
    return step % checkpoint_interval() == 0;
  }
  // halvings available before dt would sink below the floor
  int max_halvings(double dt0) const {
    int k = 0;
    while (dt0 / 2.0 > floor_ * (1.0 - 1e-12)) {
      dt0 /= 2.0;
      ++k;
    }
    return k;
  }
  double floor_value() const { return floor_; }

 private:
  int order_;
  double floor_;
};

}  // namespace vesflow
