#pragma once
#include <vector>

#include "diver/core.hpp"
#include "diver/scene.hpp"

namespace diver {

// Mean pairwise flattened distance over the set, (2 / M(M-1)) * sum_{i<j}.
// Needs at least two modes (InvalidGroup).
double diversity_reward(const TrajectorySet& set);

// Same value plus its gradient wrt every waypoint of every mode, flattened
// 2T per mode. Coincident modes contribute a zero gradient for their pair
// (the distance kink is treated as flat there).
double diversity_reward_with_grads(const TrajectorySet& set,
                                   std::vector<std::vector<double>>* grads);

// Leave-one-out view used for per-mode credit: mode m gets the mean distance
// to the other M-1 modes. The group mean of these equals diversity_reward.
std::vector<double> mode_diversity_rewards(const TrajectorySet& set);

// Negative fraction of waypoints with interpolated clearance strictly below
// d_thresh. In [-1, 0].
double safety_reward(const Trajectory& traj, const SafetyField& field,
                     double d_thresh);

struct RewardBreakdown {
  double r_div = 0.0;                // set-level diversity, shared
  std::vector<double> r_safe;        // per mode
  std::vector<double> total;         // r_div + lambda_safe * r_safe[m]
  double lambda_safe = 1.0;
};

// Per-mode totals with the set-level diversity assigned to every mode.
RewardBreakdown total_reward(const TrajectorySet& set, const SafetyField& field,
                             double lambda_safe, double d_thresh);

// Group-centered advantages: r - mean(r), optionally divided by the group
// stddev (population form, floored at 1e-6). Group size >= 2 (InvalidGroup).
std::vector<double> grpo_advantages(const std::vector<double>& rewards,
                                    bool scale_by_std = true);

struct GrpoResult {
  double loss = 0.0;
  std::vector<double> dlogp_new;  // gradient of the loss wrt each new log-prob
};

// Clipped surrogate: per-mode term -min(rho * A, clip(rho, 1-eps, 1+eps) * A)
// with rho = exp(logp_new - logp_old), averaged over the group. Gradient
// flows only to logp_new; clipped-out modes get zero gradient.
GrpoResult grpo_loss(const std::vector<double>& advantages,
                     const std::vector<double>& logp_new,
                     const std::vector<double>& logp_old, double clip_eps);

// Log-density of `sampled` under an isotropic Gaussian centered at `mean`
// with shared per-coordinate sigma, summed over all 2T coordinates.
double policy_logprob(const Trajectory& sampled, const Trajectory& mean,
                      double sigma);

// d logprob / d mean, flattened 2T: (sampled - mean) / sigma^2.
std::vector<double> policy_logprob_grad_mean(const Trajectory& sampled,
                                             const Trajectory& mean,
                                             double sigma);

// lambda_match * match + lambda_rl * rl.
double total_loss(double match, double rl, double lambda_match,
                  double lambda_rl);

}  // namespace diver
