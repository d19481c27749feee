#include "diver/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace diver {
namespace {

void check_group(const TrajectorySet& set) {
  if (set.modes.size() < 2)
    throw InvalidGroup("need at least two modes for a group reward");
}

}  // namespace

double diversity_reward(const TrajectorySet& set) {
  check_group(set);
  size_t m = set.modes.size();
  double total = 0.0;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = i + 1; j < m; ++j)
      total += flat_distance(set.modes[i], set.modes[j]);
  return total * 2.0 / (double(m) * double(m - 1));
}

double diversity_reward_with_grads(const TrajectorySet& set,
                                   std::vector<std::vector<double>>* grads) {
  check_group(set);
  size_t m = set.modes.size();
  size_t n = 2 * set.modes[0].points.size();
  double scale = 2.0 / (double(m) * double(m - 1));
  if (grads) grads->assign(m, std::vector<double>(n, 0.0));
  double total = 0.0;
  for (size_t i = 0; i < m; ++i) {
    auto fi = flatten(set.modes[i]);
    for (size_t j = i + 1; j < m; ++j) {
      auto fj = flatten(set.modes[j]);
      double d = 0.0;
      for (size_t k = 0; k < n; ++k) {
        double diff = fi[k] - fj[k];
        d += diff * diff;
      }
      d = std::sqrt(d);
      total += d;
      if (grads && d > 1e-12) {
        for (size_t k = 0; k < n; ++k) {
          double g = scale * (fi[k] - fj[k]) / d;
          (*grads)[i][k] += g;
          (*grads)[j][k] -= g;
        }
      }
    }
  }
  return total * scale;
}

std::vector<double> mode_diversity_rewards(const TrajectorySet& set) {
  check_group(set);
  size_t m = set.modes.size();
  std::vector<double> out(m, 0.0);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = i + 1; j < m; ++j) {
      double d = flat_distance(set.modes[i], set.modes[j]);
      out[i] += d;
      out[j] += d;
    }
  for (double& v : out) v /= double(m - 1);
  return out;
}

double safety_reward(const Trajectory& traj, const SafetyField& field,
                     double d_thresh) {
  if (traj.points.empty()) return 0.0;
  int violations = 0;
  for (const auto& p : traj.points)
    if (query_safety(field, p) < d_thresh) ++violations;
  return -double(violations) / double(traj.points.size());
}

RewardBreakdown total_reward(const TrajectorySet& set, const SafetyField& field,
                             double lambda_safe, double d_thresh) {
  RewardBreakdown out;
  out.lambda_safe = lambda_safe;
  out.r_div = diversity_reward(set);
  out.r_safe.reserve(set.modes.size());
  out.total.reserve(set.modes.size());
  for (const auto& mode : set.modes) {
    double rs = safety_reward(mode, field, d_thresh);
    out.r_safe.push_back(rs);
    out.total.push_back(out.r_div + lambda_safe * rs);
  }
  return out;
}

std::vector<double> grpo_advantages(const std::vector<double>& rewards,
                                    bool scale_by_std) {
  size_t m = rewards.size();
  if (m < 2) throw InvalidGroup("advantage group needs at least two members");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= double(m);
  std::vector<double> out(m);
  double var = 0.0;
  for (size_t i = 0; i < m; ++i) {
    out[i] = rewards[i] - mean;
    var += out[i] * out[i];
  }
  if (scale_by_std) {
    double sd = std::max(std::sqrt(var / double(m)), 1e-6);
    for (double& a : out) a /= sd;
  }
  return out;
}

GrpoResult grpo_loss(const std::vector<double>& advantages,
                     const std::vector<double>& logp_new,
                     const std::vector<double>& logp_old, double clip_eps) {
  size_t m = advantages.size();
  if (m < 1 || logp_new.size() != m || logp_old.size() != m)
    throw InvalidGroup("mismatched group arrays");
  GrpoResult out;
  out.dlogp_new.assign(m, 0.0);
  for (size_t i = 0; i < m; ++i) {
    if (!std::isfinite(logp_new[i]) || !std::isfinite(logp_old[i]))
      throw InvalidGroup("non-finite log-prob");
    double rho = std::exp(logp_new[i] - logp_old[i]);
    double a = rho * advantages[i];
    double clipped = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps);
    double b = clipped * advantages[i];
    if (a <= b) {
      out.loss += -a;
      out.dlogp_new[i] = -advantages[i] * rho;
    } else {
      // the clipped branch is active and constant in rho
      out.loss += -b;
    }
  }
  out.loss /= double(m);
  for (double& g : out.dlogp_new) g /= double(m);
  return out;
}

double policy_logprob(const Trajectory& sampled, const Trajectory& mean,
                      double sigma) {
  if (!(sigma > 0.0)) throw InvalidSigma("sigma must be positive");
  if (sampled.points.size() != mean.points.size())
    throw InvalidPair("sampled and mean lengths differ");
  double n = 2.0 * double(sampled.points.size());
  double quad = 0.0;
  for (size_t i = 0; i < sampled.points.size(); ++i) {
    double dx = sampled.points[i].x - mean.points[i].x;
    double dy = sampled.points[i].y - mean.points[i].y;
    quad += dx * dx + dy * dy;
  }
  return -quad / (2.0 * sigma * sigma) -
         n * (std::log(sigma) + 0.5 * std::log(2.0 * M_PI));
}

std::vector<double> policy_logprob_grad_mean(const Trajectory& sampled,
                                             const Trajectory& mean,
                                             double sigma) {
  if (!(sigma > 0.0)) throw InvalidSigma("sigma must be positive");
  if (sampled.points.size() != mean.points.size())
    throw InvalidPair("sampled and mean lengths differ");
  std::vector<double> out;
  out.reserve(2 * sampled.points.size());
  double inv = 1.0 / (sigma * sigma);
  for (size_t i = 0; i < sampled.points.size(); ++i) {
    out.push_back((sampled.points[i].x - mean.points[i].x) * inv);
    out.push_back((sampled.points[i].y - mean.points[i].y) * inv);
  }
  return out;
}

double total_loss(double match, double rl, double lambda_match,
                  double lambda_rl) {
  return lambda_match * match + lambda_rl * rl;
}

}  // namespace diver
