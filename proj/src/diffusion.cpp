#include "diver/diffusion.hpp"

#include <cmath>

namespace diver {

NoiseSchedule make_schedule(int num_steps, ScheduleKind kind) {
  if (num_steps < 2) throw InvalidSchedule("need at least 2 steps");
  NoiseSchedule s;
  s.num_steps = num_steps;
  s.betas.resize(size_t(num_steps));
  if (kind == ScheduleKind::Linear) {
    const double lo = 1e-4, hi = 0.2;
    for (int t = 0; t < num_steps; ++t)
      s.betas[size_t(t)] = lo + (hi - lo) * double(t) / double(num_steps - 1);
  } else {
    // squared-cosine cumulative profile; betas derived then clamped
    const double off = 0.008;
    auto f = [&](double u) {
      double c = std::cos((u + off) / (1.0 + off) * M_PI / 2.0);
      return c * c;
    };
    double f0 = f(0.0);
    double prev = 1.0;
    for (int t = 0; t < num_steps; ++t) {
      double cur = f(double(t + 1) / double(num_steps)) / f0;
      double beta = 1.0 - cur / prev;
      s.betas[size_t(t)] = std::min(0.999, std::max(1e-8, beta));
      prev = cur;
    }
  }
  s.alphas.resize(size_t(num_steps));
  s.alpha_bars.resize(size_t(num_steps));
  double prod = 1.0;
  for (int t = 0; t < num_steps; ++t) {
    s.alphas[size_t(t)] = 1.0 - s.betas[size_t(t)];
    prod *= s.alphas[size_t(t)];
    s.alpha_bars[size_t(t)] = prod;
  }
  validate_schedule(s);
  return s;
}

NoisedTrajectory forward_noise_with_eps(const Trajectory& traj,
                                        const NoiseSchedule& s, int step,
                                        const Trajectory& eps) {
  if (step < 0 || step >= s.num_steps)
    throw InvalidSchedule("step outside schedule");
  if (eps.points.size() != traj.points.size())
    throw InvalidPair("noise shape differs from trajectory");
  double ab = s.alpha_bars[size_t(step)];
  double ca = std::sqrt(ab), cb = std::sqrt(1.0 - ab);
  NoisedTrajectory out;
  out.step = step;
  out.eps = eps;
  out.values.dt = traj.dt;
  out.values.points.reserve(traj.points.size());
  for (size_t i = 0; i < traj.points.size(); ++i) {
    const auto& p = traj.points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw InvalidTrajectory("non-finite input to forward noising");
    out.values.points.push_back(
        {ca * p.x + cb * eps.points[i].x, ca * p.y + cb * eps.points[i].y});
  }
  return out;
}

NoisedTrajectory forward_noise(const Trajectory& traj, const NoiseSchedule& s,
                               int step, Rng& rng) {
  Trajectory eps;
  eps.dt = traj.dt;
  eps.points.reserve(traj.points.size());
  for (size_t i = 0; i < traj.points.size(); ++i) {
    double ex = rng.gauss();
    double ey = rng.gauss();
    eps.points.push_back({ex, ey});
  }
  return forward_noise_with_eps(traj, s, step, eps);
}

TrajectorySet sample_set(const DenoiseFn& model, const NoiseSchedule& schedule,
                         const Scene& scene, int m, int num_denoise_steps,
                         double norm_scale, Rng& rng) {
  if (m < 1) throw InvalidSet("need at least one mode");
  if (scene.anchors.empty()) throw MissingAnchors("scene carries no anchors");
  if (num_denoise_steps < 0 || num_denoise_steps > schedule.num_steps)
    throw InvalidSchedule("denoise steps exceed schedule length");

  TrajectorySet out;
  out.scene_id = scene.scene_id;
  out.modes.reserve(size_t(m));
  for (int j = 0; j < m; ++j) {
    const Trajectory& anchor = scene.anchors[size_t(j) % scene.anchors.size()];
    if (num_denoise_steps == 0) {
      out.modes.push_back(anchor);
      continue;
    }
    Trajectory x = normalize(anchor, norm_scale);
    int t0 = num_denoise_steps - 1;
    x = forward_noise(x, schedule, t0, rng).values;
    for (int t = t0; t >= 0; --t) {
      Trajectory x0 = model(x, j, t);
      if (x0.points.size() != x.points.size())
        throw InvalidPair("model output shape mismatch");
      if (t == 0) {
        x = std::move(x0);
        break;
      }
      double ab_t = schedule.alpha_bars[size_t(t)];
      double ab_p = schedule.alpha_bars[size_t(t - 1)];
      double ca = std::sqrt(ab_t), cb = std::sqrt(1.0 - ab_t);
      double pa = std::sqrt(ab_p), pb = std::sqrt(1.0 - ab_p);
      Trajectory next;
      next.dt = x.dt;
      next.points.reserve(x.points.size());
      for (size_t i = 0; i < x.points.size(); ++i) {
        // implied noise, then deterministic step down
        double ex = (x.points[i].x - ca * x0.points[i].x) / cb;
        double ey = (x.points[i].y - ca * x0.points[i].y) / cb;
        next.points.push_back(
            {pa * x0.points[i].x + pb * ex, pa * x0.points[i].y + pb * ey});
      }
      x = std::move(next);
    }
    out.modes.push_back(denormalize(x, norm_scale));
  }
  return out;
}

}  // namespace diver
