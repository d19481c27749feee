#pragma once
#include <functional>

#include "diver/core.hpp"
#include "diver/rng.hpp"
#include "diver/scene.hpp"

namespace diver {

enum class ScheduleKind { Linear, Cosine };

// Linear: beta evenly spaced over [1e-4, 0.2]. Cosine: squared-cosine
// cumulative profile (offset 0.008), betas clamped below 0.999. num_steps
// must be at least 2.
NoiseSchedule make_schedule(int num_steps, ScheduleKind kind);

struct NoisedTrajectory {
  Trajectory values;  // sqrt(a_bar) * traj + sqrt(1 - a_bar) * eps
  Trajectory eps;     // the exact noise drawn, same shape
  int step = 0;
};

// Closed-form forward noising at step t (0-based). Operates on whatever
// space the input lives in; callers normalize first.
NoisedTrajectory forward_noise(const Trajectory& traj, const NoiseSchedule& s,
                               int step, Rng& rng);
// Deterministic variant with injected noise (test hook and sampler internals).
NoisedTrajectory forward_noise_with_eps(const Trajectory& traj,
                                        const NoiseSchedule& s, int step,
                                        const Trajectory& eps);

// One clean-trajectory prediction: (noisy normalized trajectory, mode, step)
// -> denoised normalized trajectory.
using DenoiseFn =
    std::function<Trajectory(const Trajectory& noisy_norm, int mode, int step)>;

// Truncated deterministic sampling: each mode's anchor is normalized, noised
// to step num_denoise_steps-1, then stepped back to 0 predicting the clean
// trajectory and re-noising deterministically (no fresh noise after the
// initial draw). num_denoise_steps = 0 returns the anchors unchanged.
// Outputs are denormalized back to meters.
TrajectorySet sample_set(const DenoiseFn& model, const NoiseSchedule& schedule,
                         const Scene& scene, int m, int num_denoise_steps,
                         double norm_scale, Rng& rng);

}  // namespace diver
