#pragma once
#include <string>
#include <vector>

#include "diver/config.hpp"
#include "diver/denoiser.hpp"
#include "diver/metrics.hpp"
#include "diver/scene.hpp"

namespace diver {

// Highest per-mode total reward (shared diversity + weighted own safety);
// ties resolve to the lowest index so selection is float-order stable.
int select_mode(const TrajectorySet& set, const SafetyField& field,
                double lambda_safe, double d_thresh);

struct EvalOutput {
  std::vector<TrajectorySet> sets;  // one set of modes per scene
  std::vector<int> chosen;          // selected mode per scene
  std::vector<double> div_at;       // corpus mean diversity per timestamp
  CollisionReport collision;        // over the chosen trajectories
  double avg_l2_mean = 0.0;         // chosen vs gt, corpus mean
  double collapse_trace_mean = 0.0;
  double dt = 0.5;
};

// Deterministic sampling pass over the corpus: per-scene rng streams are
// derived from the config seed, so identical inputs give identical outputs.
EvalOutput evaluate_model(const RunConfig& cfg, const std::vector<Scene>& scenes,
                          const DenoiserParams& params);

// Per-timestamp table, one row per horizon step.
std::string eval_metrics_csv(const EvalOutput& out, uint64_t config_hash);

// Headline numbers at the 1s/2s/3s marks plus their mean.
std::string eval_summary_json(const EvalOutput& out, uint64_t config_hash);

// Mean of div_at at the 1s/2s/3s marks (the summary's "avg" field).
double headline_div(const EvalOutput& out);

}  // namespace diver
