#pragma once
#include <cstdint>
#include <string>

#include "diver/diffusion.hpp"
#include "diver/errors.hpp"

namespace diver {

enum class LossVariant { L1, L1Ppo, Match, MatchPpo, MatchGrpo };

const char* loss_variant_name(LossVariant v);
LossVariant loss_variant_from_name(const std::string& name);  // InvalidConfig

// Every tunable in one flat struct. Loaded from key=value text; unknown keys
// are rejected so typos fail loudly.
struct RunConfig {
  uint64_t seed = 0;

  // geometry and corpus
  int num_scenes = 200;
  int horizon = 6;
  double horizon_dt = 0.5;
  int modes = 6;
  int k_ref = 6;             // references stored per scene, 1..8
  int k_ref_train = -1;      // references used in training; -1 all, 0 gt-only
  std::string templates = "Straight,LeftTurn,RightTurn,Obstacle,Merge";
  double corridor_half_width = 3.5;
  double cell_size = 0.5;
  double min_x = -10.0, max_x = 60.0, min_y = -20.0, max_y = 20.0;

  // network
  int embed_dim = 64;
  int heads = 4;
  double norm_scale = 30.0;
  double feature_cell = 2.0;

  // diffusion
  int num_steps = 50;
  int denoise_steps = 10;
  std::string schedule = "linear";

  // training
  std::string loss_variant = "match_grpo";
  double lambda_match = 1.0;
  double lambda_rl = 0.1;
  double lambda_safe = 1.0;
  double d_thresh = 0.5;
  double sigma = 0.3;
  double clip_eps = 0.2;
  bool grpo_clip = true;
  bool adv_scale = true;
  double lr = 1e-3;
  double grad_clip = 5.0;
  int epochs = 30;
  int batch_size = 1;

  ScheduleKind schedule_kind() const;
  LossVariant variant() const;

  // Throws InvalidConfig when any field violates a module precondition.
  void validate() const;

  // FNV-1a over the fields that define the corpus and network shape. Loss
  // and optimizer knobs are excluded on purpose: ablation variants trained
  // on one corpus must agree on this value.
  uint64_t compat_hash() const;
};

// Parse key=value lines ('#' comments, blank lines allowed). Unknown keys
// and malformed values are InvalidConfig. The DIVER_SEED environment
// variable, when set, overrides the seed after parsing.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);  // IoError when unreadable

// Re-emission in canonical key order (parseable by parse_config_text).
std::string config_to_text(const RunConfig& cfg);

}  // namespace diver
