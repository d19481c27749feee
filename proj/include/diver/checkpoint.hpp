#pragma once
#include <cstdint>
#include <string>

#include "diver/denoiser.hpp"
#include "diver/errors.hpp"

namespace diver {

// Optimizer and reward-baseline state carried across a resume. Restoring it
// together with the full-precision weights reproduces the interrupted run
// bit for bit, because per-step randomness is derived from (seed, step)
// rather than from a serialized generator.
struct TrainState {
  uint64_t step = 0;      // completed optimizer steps
  Adam opt;
  bool baseline_init = false;
  double baseline = 0.0;  // reward EMA used by the PPO-style variants
};

// Binary layout: "DIVRCKP1" magic, version, config hash, step count, a tensor
// directory (name, shape, byte offset), then one float32 blob. When `state`
// is given, a "TRNSTATE" trailer follows with float64 copies of the weights
// plus optimizer moments, so training resumes exactly; evaluation readers
// stop at the blob.
void save_checkpoint(const std::string& path, const DenoiserParams& params,
                     uint64_t config_hash, uint64_t step,
                     const TrainState* state = nullptr);

// Peek at the stored config hash without loading tensors.
uint64_t checkpoint_config_hash(const std::string& path);

// Fill `params` (already shaped by init_denoiser) from the file. Throws
// IoError on a malformed file, ConfigMismatch when the stored hash differs
// from `expected_hash`, InvalidDim when tensor names or shapes disagree.
// With `state` non-null the float64 trailer is required and wins over the
// float32 blob.
uint64_t load_checkpoint(const std::string& path, DenoiserParams& params,
                         uint64_t expected_hash, TrainState* state = nullptr);

}  // namespace diver
