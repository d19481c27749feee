#pragma once
#include <string>
#include <vector>

#include "diver/errors.hpp"

namespace diver {

// Admissible coordinate range in meters. Everything lives in a 2D ego frame:
// x forward, y left.
constexpr double kSceneBound = 200.0;

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
};

// Waypoints are absolute ego-frame positions sampled at a fixed step.
// A displacement view is produced on demand (see displacements()).
struct Trajectory {
  std::vector<Waypoint> points;
  double dt = 0.5;  // seconds between consecutive waypoints
};

struct TrajectorySet {
  std::vector<Trajectory> modes;
  std::string scene_id;
};

// Diffusion schedule. alphas[t] = 1 - betas[t], alpha_bars[t] = prod alphas[0..t].
struct NoiseSchedule {
  int num_steps = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
};

void validate_waypoint(const Waypoint& w);

// Checks finiteness, bounds, dt > 0 and non-emptiness. Used at domain
// boundaries (parsing, scene construction), not in inner math loops.
void validate_trajectory(const Trajectory& t);

// Consistency: sizes match num_steps, betas in [0,1), alphas = 1 - betas,
// alpha_bars the running product in (0,1] and strictly decreasing.
void validate_schedule(const NoiseSchedule& s);

// Prefix sums of a displacement sequence -> absolute positions.
// Throws InvalidTrajectory on non-finite input.
Trajectory cumulative_sum(const Trajectory& deltas);

// Inverse view of cumulative_sum: consecutive differences, first point kept
// relative to the origin.
Trajectory displacements(const Trajectory& absolute);

// Divide / multiply all coordinates by a positive scale.
Trajectory normalize(const Trajectory& t, double scale);
Trajectory denormalize(const Trajectory& t, double scale);

// Interleaved [x1, y1, x2, y2, ...], length 2T.
std::vector<double> flatten(const Trajectory& t);

// L2 distance between flattened trajectories. Lengths must match (InvalidPair).
double flat_distance(const Trajectory& a, const Trajectory& b);
double flat_sq_distance(const Trajectory& a, const Trajectory& b);

}  // namespace diver
