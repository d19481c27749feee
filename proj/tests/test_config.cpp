#include <cstdlib>

#include "diver/config.hpp"
#include "doctest.h"

using namespace diver;

TEST_CASE("defaults are self-consistent") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.variant() == LossVariant::MatchGrpo);
  CHECK(cfg.schedule_kind() == ScheduleKind::Linear);
}

TEST_CASE("key=value parsing with comments and blanks") {
  RunConfig cfg = parse_config_text(
      "# run setup\n"
      "seed = 11\n"
      "\n"
      "num_scenes = 40   # small corpus\n"
      "loss_variant = match\n"
      "schedule = cosine\n");
  CHECK(cfg.seed == 11);
  CHECK(cfg.num_scenes == 40);
  CHECK(cfg.variant() == LossVariant::Match);
  CHECK(cfg.schedule_kind() == ScheduleKind::Cosine);
  CHECK(cfg.modes == 6);  // untouched keys keep defaults
}

TEST_CASE("parser rejects junk") {
  CHECK_THROWS_AS(parse_config_text("not_a_key = 3\n"), InvalidConfig);
  CHECK_THROWS_AS(parse_config_text("seed = banana\n"), InvalidConfig);
  CHECK_THROWS_AS(parse_config_text("modes = 4.5\n"), InvalidConfig);
  CHECK_THROWS_AS(parse_config_text("lr = \n"), InvalidConfig);
  CHECK_THROWS_AS(parse_config_text("seed 11\n"), InvalidConfig);
  CHECK_THROWS_AS(parse_config_text("loss_variant = dagger\n"), InvalidConfig);
  CHECK_THROWS_AS(parse_config_text("schedule = quartic\n"), InvalidConfig);
}

TEST_CASE("environment seed override wins over the file") {
  setenv("DIVER_SEED", "777", 1);
  RunConfig cfg = parse_config_text("seed = 5\n");
  unsetenv("DIVER_SEED");
  CHECK(cfg.seed == 777);

  setenv("DIVER_SEED", "abc", 1);
  CHECK_THROWS_AS(parse_config_text("seed = 5\n"), InvalidConfig);
  unsetenv("DIVER_SEED");
}

TEST_CASE("validation catches out-of-range settings") {
  auto broken = [](auto mutate) {
    RunConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.num_scenes = -1; }).validate(), InvalidConfig);
  CHECK_NOTHROW(broken([](RunConfig& c) { c.num_scenes = 0; }).validate());
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.horizon = 1; }).validate(), InvalidConfig);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.k_ref = 0; }).validate(), InvalidConfig);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.k_ref = 9; }).validate(), InvalidConfig);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.k_ref_train = 7; }).validate(), InvalidConfig);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.embed_dim = 12; }).validate(), InvalidConfig);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.heads = 3; }).validate(), InvalidConfig);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.denoise_steps = 99; }).validate(), InvalidConfig);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.clip_eps = 1.5; }).validate(), InvalidConfig);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.epochs = -1; }).validate(), InvalidConfig);
  CHECK_NOTHROW(broken([](RunConfig& c) { c.epochs = 0; }).validate());
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.batch_size = 0; }).validate(), InvalidConfig);
}

TEST_CASE("round trip through canonical text") {
  RunConfig cfg;
  cfg.seed = 99;
  cfg.num_scenes = 33;
  cfg.lambda_rl = 0.25;
  cfg.loss_variant = "match_ppo";
  cfg.templates = "Obstacle,Merge";
  RunConfig back = parse_config_text(config_to_text(cfg));
  CHECK(back.seed == cfg.seed);
  CHECK(back.num_scenes == cfg.num_scenes);
  CHECK(back.lambda_rl == cfg.lambda_rl);
  CHECK(back.loss_variant == cfg.loss_variant);
  CHECK(back.templates == cfg.templates);
  CHECK(back.compat_hash() == cfg.compat_hash());
}

TEST_CASE("corpus hash covers generation inputs only") {
  RunConfig base;
  uint64_t h = base.compat_hash();

  // training and sampling knobs must not invalidate an existing corpus
  RunConfig t1 = base;
  t1.loss_variant = "l1";
  t1.lr = 3e-4;
  t1.epochs = 3;
  t1.lambda_safe = 4.0;
  t1.k_ref_train = 2;
  t1.num_steps = 20;
  t1.denoise_steps = 4;
  t1.schedule = "cosine";
  t1.batch_size = 4;
  CHECK(t1.compat_hash() == h);

  // anything the generator or its anchors consume must invalidate it
  RunConfig g1 = base;
  g1.seed = 1;
  CHECK(g1.compat_hash() != h);
  RunConfig g2 = base;
  g2.num_scenes = 100;
  CHECK(g2.compat_hash() != h);
  RunConfig g3 = base;
  g3.templates = "Straight";
  CHECK(g3.compat_hash() != h);
  RunConfig g4 = base;
  g4.k_ref = 4;
  CHECK(g4.compat_hash() != h);
  RunConfig g5 = base;
  g5.d_thresh = 0.75;
  CHECK(g5.compat_hash() != h);
  RunConfig g6 = base;
  g6.horizon = 8;
  CHECK(g6.compat_hash() != h);
}

TEST_CASE("loss variant names round trip") {
  for (const char* name :
       {"l1", "l1_ppo", "match", "match_ppo", "match_grpo"}) {
    CHECK(loss_variant_name(loss_variant_from_name(name)) == name);
  }
  CHECK_THROWS_AS(loss_variant_from_name("bc"), InvalidConfig);
}
