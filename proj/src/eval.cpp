#include "diver/eval.hpp"

#include <cmath>
#include <sstream>

#include "diver/diffusion.hpp"
#include "diver/rewards.hpp"
#include "diver/train.hpp"
#include "json.hpp"

namespace diver {
namespace {

constexpr uint64_t kEvalStream = 0xe7a1;

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Timestamp indices for the 1s/2s/3s marks, keeping only those inside the
// horizon.
std::vector<int> mark_indices(double dt, int horizon) {
  std::vector<int> out;
  for (int s = 1; s <= 3; ++s) {
    int idx = int(std::lround(double(s) / dt)) - 1;
    if (idx >= 0 && idx < horizon) out.push_back(idx);
  }
  return out;
}

}  // namespace

int select_mode(const TrajectorySet& set, const SafetyField& field,
                double lambda_safe, double d_thresh) {
  RewardBreakdown rb = total_reward(set, field, lambda_safe, d_thresh);
  int best = 0;
  for (size_t m = 1; m < rb.total.size(); ++m)
    if (rb.total[m] > rb.total[size_t(best)]) best = int(m);
  return best;
}

EvalOutput evaluate_model(const RunConfig& cfg, const std::vector<Scene>& scenes,
                          const DenoiserParams& params) {
  cfg.validate();
  if (scenes.empty()) throw InsufficientData("no scenes to evaluate");

  DenoiserConfig dcfg = to_denoiser_config(cfg);
  NoiseSchedule schedule = make_schedule(cfg.num_steps, cfg.schedule_kind());
  uint64_t base = derive_seed(cfg.seed, kEvalStream);

  EvalOutput out;
  out.dt = cfg.horizon_dt;
  out.div_at.assign(size_t(cfg.horizon), 0.0);
  std::vector<Trajectory> chosen_trajs;
  std::vector<const SafetyField*> fields;

  for (size_t i = 0; i < scenes.size(); ++i) {
    const Scene& scene = scenes[i];
    SceneTokens tokens = build_scene_tokens(scene, dcfg);
    std::vector<Trajectory> ref_norms(size_t(cfg.modes));
    for (int m = 0; m < cfg.modes; ++m)
      ref_norms[size_t(m)] = normalize(
          scene.anchors[size_t(m) % scene.anchors.size()], cfg.norm_scale);
    DenoiseFn model = [&](const Trajectory& noisy, int mode, int) {
      return forward_mode(params, tokens, noisy, ref_norms[size_t(mode)], mode);
    };
    Rng rng(derive_seed(base, i));
    TrajectorySet set = sample_set(model, schedule, scene, cfg.modes,
                                   cfg.denoise_steps, cfg.norm_scale, rng);
    set.scene_id = scene.scene_id;

    int pick = select_mode(set, scene.safety_field, cfg.lambda_safe, cfg.d_thresh);
    out.chosen.push_back(pick);
    chosen_trajs.push_back(set.modes[size_t(pick)]);
    fields.push_back(&scene.safety_field);

    if (cfg.modes >= 2)
      for (int t = 0; t < cfg.horizon; ++t)
        out.div_at[size_t(t)] += diversity_metric(set, t);
    out.avg_l2_mean += avg_l2(set.modes[size_t(pick)], scene.gt);
    out.collapse_trace_mean += collapse_diagnostic(set).trace;
    out.sets.push_back(std::move(set));
  }

  double n = double(scenes.size());
  for (double& d : out.div_at) d /= n;
  out.avg_l2_mean /= n;
  out.collapse_trace_mean /= n;
  out.collision = collision_rate(chosen_trajs, fields, cfg.d_thresh);
  return out;
}

double headline_div(const EvalOutput& out) {
  std::vector<int> marks = mark_indices(out.dt, int(out.div_at.size()));
  if (marks.empty()) return 0.0;
  double sum = 0.0;
  for (int idx : marks) sum += out.div_at[size_t(idx)];
  return sum / double(marks.size());
}

std::string eval_metrics_csv(const EvalOutput& out, uint64_t config_hash) {
  std::ostringstream csv;
  csv.precision(17);
  csv << "# config " << hash_hex(config_hash) << "\n";
  csv << "t,time_s,div,collision\n";
  for (size_t t = 0; t < out.div_at.size(); ++t) {
    csv << t << "," << (double(t + 1) * out.dt) << "," << out.div_at[t] << ","
        << out.collision.per_t[t] << "\n";
  }
  return csv.str();
}

std::string eval_summary_json(const EvalOutput& out, uint64_t config_hash) {
  nlohmann::json j;
  j["config_hash"] = hash_hex(config_hash);
  j["num_scenes"] = out.sets.size();
  std::vector<int> marks = mark_indices(out.dt, int(out.div_at.size()));
  nlohmann::json div, coll;
  for (int idx : marks) {
    std::string key = std::to_string(int(std::lround(double(idx + 1) * out.dt))) + "s";
    div[key] = out.div_at[size_t(idx)];
    coll[key] = out.collision.per_t[size_t(idx)];
  }
  div["avg"] = headline_div(out);
  coll["avg"] = out.collision.average;
  j["div"] = div;
  j["collision"] = coll;
  j["avg_l2"] = out.avg_l2_mean;
  j["collapse_trace"] = out.collapse_trace_mean;
  return j.dump(2) + "\n";
}

}  // namespace diver
