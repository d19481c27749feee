#pragma once
#include <vector>

#include "diver/core.hpp"
#include "diver/scene.hpp"

namespace diver {

// Normalized per-timestamp diversity: mean pairwise waypoint distance at
// t_index divided by (1e-6 + mean waypoint magnitude), clamped to [0, 1].
// Needs M >= 2 (InvalidSet) and t_index < T.
double diversity_metric(const TrajectorySet& set, int t_index);

struct CollisionReport {
  std::vector<double> per_t;  // fraction of scenes violating at each step
  double average = 0.0;
};

// Fraction of corpus entries whose trajectory dips below d_thresh clearance,
// per timestamp. Corpus and fields must align (InvalidCorpus).
CollisionReport collision_rate(const std::vector<Trajectory>& chosen,
                               const std::vector<const SafetyField*>& fields,
                               double d_thresh);

struct CollapseReport {
  double trace = 0.0;            // trace of the empirical mode covariance
  std::vector<double> mean;      // flattened mean trajectory over modes
  double cross_trace = 0.0;      // literal cross form vs a supplied target
  bool has_cross = false;
};

// Mode-covariance diagnostic. With a GT supplied the literal cross form
// trace((tau - mu)(gt - mu)^T averaged) is reported alongside; the headline
// trace is always the standard covariance.
CollapseReport collapse_diagnostic(const TrajectorySet& set,
                                   const Trajectory* gt = nullptr);

// Mean per-waypoint Euclidean distance (InvalidPair on length mismatch).
double avg_l2(const Trajectory& pred, const Trajectory& gt);

struct MetricReport {
  std::vector<double> div_at;        // Div per timestamp
  double div_avg = 0.0;
  std::vector<double> collision_at;  // fraction per timestamp
  double collision_avg = 0.0;
  double avg_l2 = 0.0;
  double collapse_trace = 0.0;
};

}  // namespace diver
