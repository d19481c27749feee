#include "diver/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "diver/matching.hpp"
#include "diver/rewards.hpp"
#include "json.hpp"

namespace diver {
namespace {

constexpr double kBaselineDecay = 0.99;

bool uses_hungarian(LossVariant v) {
  return v == LossVariant::Match || v == LossVariant::MatchPpo ||
         v == LossVariant::MatchGrpo;
}

bool uses_rl(LossVariant v) {
  return v == LossVariant::L1Ppo || v == LossVariant::MatchPpo ||
         v == LossVariant::MatchGrpo;
}

// Plain L1 against the single ground truth, mean over modes and coordinates.
double l1_loss(const std::vector<Trajectory>& means, const Trajectory& gt,
               std::vector<std::vector<double>>* grads) {
  size_t m_count = means.size();
  size_t coords = 2 * gt.points.size();
  double denom = double(m_count) * double(coords);
  double loss = 0.0;
  grads->assign(m_count, std::vector<double>(coords, 0.0));
  for (size_t m = 0; m < m_count; ++m) {
    if (means[m].points.size() != gt.points.size())
      throw InvalidPair("prediction/gt horizon mismatch");
    for (size_t i = 0; i < gt.points.size(); ++i) {
      double dx = means[m].points[i].x - gt.points[i].x;
      double dy = means[m].points[i].y - gt.points[i].y;
      loss += std::abs(dx) + std::abs(dy);
      (*grads)[m][2 * i] = (dx > 0 ? 1.0 : dx < 0 ? -1.0 : 0.0) / denom;
      (*grads)[m][2 * i + 1] = (dy > 0 ? 1.0 : dy < 0 ? -1.0 : 0.0) / denom;
    }
  }
  return loss / denom;
}

// References used for imitation at this K: 0 collapses to the ground truth
// alone, otherwise the first K stored references (slot 0 is the gt itself).
std::vector<Trajectory> training_refs(const Scene& scene, int k_train) {
  if (k_train == 0) return {scene.gt};
  size_t k = k_train < 0 ? scene.reference_gts.size()
                         : std::min<size_t>(size_t(k_train), scene.reference_gts.size());
  return std::vector<Trajectory>(scene.reference_gts.begin(),
                                 scene.reference_gts.begin() + k);
}

void dump_bad_batch(const std::string& path, uint64_t step, const Scene& scene,
                    const std::vector<ModeSample>& samples,
                    const std::vector<Trajectory>& actions, double l_match,
                    double l_rl) {
  if (path.empty()) return;
  nlohmann::json j;
  j["step"] = step;
  j["scene_id"] = scene.scene_id;
  j["l_match"] = l_match;
  j["l_rl"] = l_rl;
  auto traj_json = [](const Trajectory& t) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : t.points) arr.push_back({p.x, p.y});
    return arr;
  };
  for (const auto& s : samples) j["means"].push_back(traj_json(s.mean));
  for (const auto& a : actions) j["actions"].push_back(traj_json(a));
  std::ofstream out(path, std::ios::trunc);
  if (out) out << j.dump(2) << "\n";
}

}  // namespace

DenoiserConfig to_denoiser_config(const RunConfig& cfg) {
  DenoiserConfig d;
  d.embed_dim = cfg.embed_dim;
  d.heads = cfg.heads;
  d.horizon = cfg.horizon;
  d.modes = cfg.modes;
  d.norm_scale = cfg.norm_scale;
  d.feature_cell = cfg.feature_cell;
  return d;
}

SceneGenParams to_scene_params(const RunConfig& cfg) {
  SceneGenParams p;
  p.horizon = cfg.horizon;
  p.dt = cfg.horizon_dt;
  p.modes = cfg.modes;
  p.k_ref = cfg.k_ref;
  p.corridor_half_width = cfg.corridor_half_width;
  p.cell_size = cfg.cell_size;
  p.min_x = cfg.min_x;
  p.max_x = cfg.max_x;
  p.min_y = cfg.min_y;
  p.max_y = cfg.max_y;
  p.d_thresh = cfg.d_thresh;
  return p;
}

std::vector<ModeSample> sample_modes_cached(const DenoiserParams& params,
                                            const DenoiserConfig& dcfg,
                                            const Scene& scene,
                                            const SceneTokens& tokens,
                                            const NoiseSchedule& schedule,
                                            int num_denoise_steps, Rng& rng) {
  if (num_denoise_steps < 1)
    throw InvalidSchedule("training needs at least one denoise step");
  if (scene.anchors.empty()) throw MissingAnchors("scene has no anchors");
  int m_count = dcfg.modes;
  std::vector<ModeSample> out(static_cast<size_t>(m_count));
  std::vector<Trajectory> ref_norms(static_cast<size_t>(m_count));
  for (int m = 0; m < m_count; ++m)
    ref_norms[size_t(m)] =
        normalize(scene.anchors[size_t(m) % scene.anchors.size()], dcfg.norm_scale);

  DenoiseFn model = [&](const Trajectory& noisy, int mode, int step) {
    ModeSample& slot = out[size_t(mode)];
    if (step == 0) {
      slot.last_noisy_norm = noisy;
      slot.ref_norm = ref_norms[size_t(mode)];
      return forward_mode(params, tokens, noisy, ref_norms[size_t(mode)], mode,
                          &slot.cache);
    }
    return forward_mode(params, tokens, noisy, ref_norms[size_t(mode)], mode);
  };

  TrajectorySet set = sample_set(model, schedule, scene, m_count,
                                 num_denoise_steps, dcfg.norm_scale, rng);
  for (int m = 0; m < m_count; ++m) out[size_t(m)].mean = set.modes[size_t(m)];
  return out;
}

void train_model(const RunConfig& cfg, const std::vector<Scene>& scenes,
                 DenoiserParams& params, TrainState& state,
                 const StepObserver& observer, const std::string& nan_dump_path) {
  cfg.validate();
  LossVariant variant = cfg.variant();
  bool rl = uses_rl(variant) && cfg.lambda_rl > 0.0;
  bool grpo = variant == LossVariant::MatchGrpo;
  if (rl && cfg.modes < 2)
    throw InvalidConfig("policy rewards need at least two modes");
  if (scenes.empty()) throw InsufficientData("no scenes to train on");
  if (cfg.denoise_steps < 1)
    throw InvalidConfig("training needs denoise_steps >= 1");

  DenoiserConfig dcfg = to_denoiser_config(cfg);
  NoiseSchedule schedule = make_schedule(cfg.num_steps, cfg.schedule_kind());
  std::vector<SceneTokens> tokens;
  tokens.reserve(scenes.size());
  for (const Scene& s : scenes) tokens.push_back(build_scene_tokens(s, dcfg));

  if (state.opt.m.empty()) state.opt.init(params);

  size_t n = scenes.size();
  size_t batch = size_t(cfg.batch_size);
  uint64_t steps_per_epoch = (n + batch - 1) / batch;
  uint64_t total_steps = uint64_t(cfg.epochs) * steps_per_epoch;
  double sigma2 = cfg.sigma * cfg.sigma;
  int coords = 2 * cfg.horizon;

  for (uint64_t step = state.step; step < total_steps; ++step) {
    Rng rng(derive_seed(cfg.seed, step));
    params.zero_grads();
    double sum_match = 0.0, sum_rl = 0.0, sum_div = 0.0, sum_safe = 0.0;
    double adv_resid = 0.0;

    for (size_t j = 0; j < batch; ++j) {
      size_t idx = (step * batch + j) % n;
      const Scene& scene = scenes[idx];
      std::vector<ModeSample> samples;
      try {
        samples = sample_modes_cached(params, dcfg, scene, tokens[idx],
                                      schedule, cfg.denoise_steps, rng);
      } catch (const InvalidTrajectory&) {
        // the sampler refuses non-finite intermediates, which at this point
        // means the weights have blown up
        dump_bad_batch(nan_dump_path, step, scene, {}, {}, 0.0, 0.0);
        throw Error("non-finite prediction at step " + std::to_string(step) +
                    " on scene " + scene.scene_id);
      }

      std::vector<Trajectory> means;
      means.reserve(samples.size());
      for (const auto& s : samples) means.push_back(s.mean);

      for (const auto& mu : means)
        for (const auto& p : mu.points)
          if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            dump_bad_batch(nan_dump_path, step, scene, samples, {}, 0.0, 0.0);
            throw Error("non-finite prediction at step " +
                        std::to_string(step) + " on scene " + scene.scene_id);
          }

      double l_match = 0.0;
      std::vector<std::vector<double>> dmean(means.size(),
                                             std::vector<double>(size_t(coords), 0.0));
      if (uses_hungarian(variant)) {
        MatchResult mr = match_loss(means, training_refs(scene, cfg.k_ref_train));
        l_match = mr.loss;
        for (size_t m = 0; m < means.size(); ++m)
          for (int c = 0; c < coords; ++c)
            dmean[m][size_t(c)] = cfg.lambda_match * mr.grads[m][size_t(c)];
      } else {
        std::vector<std::vector<double>> g;
        l_match = l1_loss(means, scene.gt, &g);
        for (size_t m = 0; m < means.size(); ++m)
          for (int c = 0; c < coords; ++c)
            dmean[m][size_t(c)] = cfg.lambda_match * g[m][size_t(c)];
      }

      double l_rl = 0.0;
      std::vector<Trajectory> actions;
      if (rl) {
        actions.reserve(means.size());
        for (const auto& mu : means) {
          Trajectory a = mu;
          for (auto& p : a.points) {
            p.x += cfg.sigma * rng.gauss();
            p.y += cfg.sigma * rng.gauss();
          }
          actions.push_back(std::move(a));
        }
        TrajectorySet act_set;
        act_set.scene_id = scene.scene_id;
        act_set.modes = actions;

        // Per-mode credit: leave-one-out diversity plus own safety. The
        // shared set-level diversity would cancel under group centering.
        std::vector<double> div_m = mode_diversity_rewards(act_set);
        std::vector<double> totals(actions.size());
        for (size_t m = 0; m < actions.size(); ++m)
          totals[m] = div_m[m] + cfg.lambda_safe * safety_reward(actions[m],
                                                                 scene.safety_field,
                                                                 cfg.d_thresh);

        std::vector<double> adv;
        if (grpo) {
          adv = grpo_advantages(totals, cfg.adv_scale);
        } else {
          double mean_r = 0.0;
          for (double r : totals) mean_r += r;
          mean_r /= double(totals.size());
          if (!state.baseline_init) {
            state.baseline = mean_r;
            state.baseline_init = true;
          }
          adv.resize(totals.size());
          for (size_t m = 0; m < totals.size(); ++m)
            adv[m] = totals[m] - state.baseline;
          state.baseline = kBaselineDecay * state.baseline +
                           (1.0 - kBaselineDecay) * mean_r;
        }

        if (grpo) {
          double s = 0.0;
          for (double a : adv) s += a;
          adv_resid = std::max(adv_resid, std::fabs(s));
        }

        std::vector<double> logp(actions.size());
        for (size_t m = 0; m < actions.size(); ++m)
          logp[m] = policy_logprob(actions[m], means[m], cfg.sigma);
        GrpoResult gr = grpo_loss(adv, logp, logp, cfg.clip_eps);
        l_rl = gr.loss;

        for (size_t m = 0; m < actions.size(); ++m) {
          double dl = cfg.lambda_rl * gr.dlogp_new[m];
          for (size_t i = 0; i < means[m].points.size(); ++i) {
            dmean[m][2 * i] += dl * (actions[m].points[i].x - means[m].points[i].x) / sigma2;
            dmean[m][2 * i + 1] += dl * (actions[m].points[i].y - means[m].points[i].y) / sigma2;
          }
        }
      }

      double div_log = 0.0;
      if (means.size() >= 2) {
        TrajectorySet mean_set;
        mean_set.scene_id = scene.scene_id;
        mean_set.modes = means;
        div_log = diversity_reward(mean_set);
      }
      double safe_log = 0.0;
      for (const auto& mu : means)
        safe_log += safety_reward(mu, scene.safety_field, cfg.d_thresh);
      safe_log /= double(means.size());

      if (!std::isfinite(l_match) || !std::isfinite(l_rl)) {
        dump_bad_batch(nan_dump_path, step, scene, samples, actions, l_match, l_rl);
        throw Error("non-finite loss at step " + std::to_string(step) +
                    " on scene " + scene.scene_id);
      }

      // Chain to normalized prediction space and push through the network.
      for (size_t m = 0; m < samples.size(); ++m) {
        std::vector<double> dpred(static_cast<size_t>(coords));
        bool live = false;
        for (int c = 0; c < coords; ++c) {
          dpred[size_t(c)] = dmean[m][size_t(c)] * cfg.norm_scale / double(batch);
          live = live || dpred[size_t(c)] != 0.0;
        }
        if (live) backward_mode(params, tokens[idx], samples[m].cache, dpred);
      }

      sum_match += l_match;
      sum_rl += l_rl;
      sum_div += div_log;
      sum_safe += safe_log;
    }

    double grad_norm = clip_gradients(params, cfg.grad_clip);
    if (!std::isfinite(grad_norm)) {
      throw Error("non-finite gradient at step " + std::to_string(step));
    }
    state.opt.step(params, cfg.lr);
    state.step = step + 1;

    if (observer) {
      StepLog log;
      log.step = state.step;
      log.epoch = int((step * batch) / n);
      log.l_match = sum_match / double(batch);
      log.l_rl = sum_rl / double(batch);
      log.r_div = sum_div / double(batch);
      log.r_safe = sum_safe / double(batch);
      log.grad_norm = grad_norm;
      log.total = total_loss(log.l_match, log.l_rl, cfg.lambda_match, cfg.lambda_rl);
      log.adv_abs_sum = adv_resid;
      observer(log);
    }
  }
}

}  // namespace diver
