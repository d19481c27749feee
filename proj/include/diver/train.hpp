#pragma once
#include <functional>
#include <string>
#include <vector>

#include "diver/checkpoint.hpp"
#include "diver/config.hpp"
#include "diver/denoiser.hpp"
#include "diver/diffusion.hpp"
#include "diver/scene.hpp"

namespace diver {

DenoiserConfig to_denoiser_config(const RunConfig& cfg);
SceneGenParams to_scene_params(const RunConfig& cfg);

// One denoised mode with everything the backward pass needs: the cache of
// the final reverse step and the inputs that produced it.
struct ModeSample {
  Trajectory mean;  // denoised trajectory in meters
  ModeCache cache;
  Trajectory last_noisy_norm;
  Trajectory ref_norm;
};

// Runs the truncated reverse chain once per mode, recording the final
// forward pass so gradients can flow into it. Means are identical to
// sample_set fed the same rng. Requires num_denoise_steps >= 1.
std::vector<ModeSample> sample_modes_cached(const DenoiserParams& params,
                                            const DenoiserConfig& dcfg,
                                            const Scene& scene,
                                            const SceneTokens& tokens,
                                            const NoiseSchedule& schedule,
                                            int num_denoise_steps, Rng& rng);

struct StepLog {
  uint64_t step = 0;  // completed optimizer steps after this one
  int epoch = 0;
  double l_match = 0.0;   // imitation term (Hungarian or plain L1)
  double l_rl = 0.0;      // surrogate policy loss, 0 when disabled
  double r_div = 0.0;     // set diversity of the denoised means
  double r_safe = 0.0;    // mean safety reward of the denoised means
  double grad_norm = 0.0; // global norm before clipping
  double total = 0.0;
  // centering residual: worst |sum of advantages| across the step's scenes,
  // 0 whenever the surrogate term is off
  double adv_abs_sum = 0.0;
};

using StepObserver = std::function<void(const StepLog&)>;

// Full driver. Scene order is fixed; an optimizer step consumes batch_size
// scenes; per-step randomness is derived from (seed, step) so a resume from
// `state` continues bit for bit. Runs until epochs * ceil(N / batch_size)
// steps are done. A non-finite loss aborts after writing a diagnostic dump
// of the offending batch (path left empty skips the dump).
void train_model(const RunConfig& cfg, const std::vector<Scene>& scenes,
                 DenoiserParams& params, TrainState& state,
                 const StepObserver& observer = nullptr,
                 const std::string& nan_dump_path = "");

}  // namespace diver
