#include <cmath>

#include "diver/commands.hpp"
#include "diver/eval.hpp"
#include "diver/train.hpp"
#include "json.hpp"
#include "doctest.h"

using namespace diver;

namespace {

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.seed = 9;
  cfg.num_scenes = 5;
  cfg.embed_dim = 8;
  cfg.heads = 2;
  cfg.num_steps = 12;
  cfg.denoise_steps = 4;
  return cfg;
}

}  // namespace

TEST_CASE("an untrained network still yields a sane report") {
  RunConfig cfg = tiny_config();
  std::vector<Scene> scenes = generate_corpus(cfg);
  DenoiserParams params = init_denoiser(to_denoiser_config(cfg), 4);
  EvalOutput out = evaluate_model(cfg, scenes, params);

  REQUIRE(out.sets.size() == scenes.size());
  REQUIRE(out.chosen.size() == scenes.size());
  REQUIRE(int(out.div_at.size()) == cfg.horizon);
  for (double d : out.div_at) {
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
  for (double c : out.collision.per_t) {
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }
  for (int m : out.chosen) {
    CHECK(m >= 0);
    CHECK(m < cfg.modes);
  }
  CHECK(out.avg_l2_mean >= 0.0);
  CHECK(out.collapse_trace_mean >= 0.0);
  CHECK(std::isfinite(headline_div(out)));

  nlohmann::json summary =
      nlohmann::json::parse(eval_summary_json(out, cfg.compat_hash()));
  CHECK(summary["num_scenes"] == scenes.size());
  CHECK(summary["div"].contains("1s"));
  CHECK(summary["div"].contains("avg"));
  CHECK(summary["collision"].contains("avg"));
}

TEST_CASE("evaluation is repeatable") {
  RunConfig cfg = tiny_config();
  std::vector<Scene> scenes = generate_corpus(cfg);
  DenoiserParams params = init_denoiser(to_denoiser_config(cfg), 4);

  EvalOutput a = evaluate_model(cfg, scenes, params);
  EvalOutput b = evaluate_model(cfg, scenes, params);
  CHECK(eval_summary_json(a, 1) == eval_summary_json(b, 1));
  CHECK(eval_metrics_csv(a, 1) == eval_metrics_csv(b, 1));
  for (size_t s = 0; s < a.sets.size(); ++s) {
    CHECK(a.chosen[s] == b.chosen[s]);
    for (size_t m = 0; m < a.sets[s].modes.size(); ++m)
      for (size_t i = 0; i < a.sets[s].modes[m].points.size(); ++i) {
        CHECK(a.sets[s].modes[m].points[i].x == b.sets[s].modes[m].points[i].x);
        CHECK(a.sets[s].modes[m].points[i].y == b.sets[s].modes[m].points[i].y);
      }
  }
}

TEST_CASE("mode selection prefers the earliest of tied candidates") {
  SafetyField open;
  open.origin = {-5.0, -5.0};
  open.cell = 1.0;
  open.rows = 10;
  open.cols = 10;
  open.values.assign(100, 10.0);

  // mirror-image modes: pairwise gaps and clearances are symmetric
  Trajectory up, down;
  up.points = {{1, 1}, {2, 2}};
  down.points = {{1, -1}, {2, -2}};
  TrajectorySet set;
  set.scene_id = "s";
  set.modes = {up, down};
  CHECK(select_mode(set, open, 1.0, 0.5) == 0);

  std::swap(set.modes[0], set.modes[1]);
  CHECK(select_mode(set, open, 1.0, 0.5) == 0);
}

TEST_CASE("per-timestamp table lines up with the horizon") {
  RunConfig cfg = tiny_config();
  std::vector<Scene> scenes = generate_corpus(cfg);
  DenoiserParams params = init_denoiser(to_denoiser_config(cfg), 4);
  EvalOutput out = evaluate_model(cfg, scenes, params);

  std::string csv = eval_metrics_csv(out, 0xbeef);
  CHECK(csv.find("# config 000000000000beef") != std::string::npos);
  CHECK(csv.find("t,time_s,div,collision") != std::string::npos);
  size_t rows = 0;
  for (char c : csv)
    if (c == '\n') ++rows;
  CHECK(rows == size_t(cfg.horizon) + 2);  // banner + header + data
}
