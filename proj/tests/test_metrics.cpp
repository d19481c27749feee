#include <cmath>

#include "diver/metrics.hpp"
#include "diver/rng.hpp"
#include "doctest.h"

using namespace diver;

namespace {

Trajectory traj_xs(std::vector<Waypoint> pts) {
  Trajectory t;
  t.points = std::move(pts);
  return t;
}

TrajectorySet set_of(std::vector<Trajectory> modes) {
  TrajectorySet s;
  s.modes = std::move(modes);
  s.scene_id = "s";
  return s;
}

SafetyField const_field(double value) {
  SafetyField f;
  f.origin = {-5.0, -5.0};
  f.cell = 1.0;
  f.rows = 12;
  f.cols = 12;
  f.values.assign(f.rows * f.cols, value);
  return f;
}

}  // namespace

TEST_CASE("per-timestamp diversity worked examples") {
  TrajectorySet same = set_of({traj_xs({{2, 1}}), traj_xs({{2, 1}})});
  CHECK(diversity_metric(same, 0) == doctest::Approx(0.0).epsilon(1e-9));

  TrajectorySet sym = set_of({traj_xs({{1, 0}}), traj_xs({{-1, 0}})});
  CHECK(diversity_metric(sym, 0) == doctest::Approx(1.0).epsilon(1e-9));

  TrajectorySet off = set_of({traj_xs({{4, 0}}), traj_xs({{5, 0}})});
  CHECK(diversity_metric(off, 0) ==
        doctest::Approx(1.0 / (1e-6 + 4.5)).epsilon(1e-9));

  CHECK_THROWS_AS(diversity_metric(set_of({traj_xs({{1, 0}})}), 0), InvalidSet);
  CHECK_THROWS_AS(diversity_metric(sym, 1), InvalidSet);
}

TEST_CASE("diversity metric stays in range and matches its definition") {
  Rng rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Trajectory> modes;
    for (int m = 0; m < 4; ++m) {
      Trajectory t;
      for (int i = 0; i < 3; ++i)
        t.points.push_back({rng.uniform(1, 8), rng.uniform(-4, 4)});
      modes.push_back(t);
    }
    TrajectorySet s = set_of(modes);
    for (int t = 0; t < 3; ++t) {
      double d = diversity_metric(s, t);
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
    }

    std::vector<Trajectory> perm = {modes[3], modes[1], modes[0], modes[2]};
    CHECK(diversity_metric(set_of(perm), 1) ==
          doctest::Approx(diversity_metric(s, 1)).epsilon(1e-12));

    // mean pairwise gap over mean magnitude, clamped; checked at two common
    // scales so the epsilon term in the denominator is exercised too
    for (double c : {1.0, 3.7}) {
      double raw = 0.0, mag = 0.0;
      for (size_t i = 0; i < modes.size(); ++i) {
        const Waypoint& a = modes[i].points[2];
        mag += std::hypot(c * a.x, c * a.y);
        for (size_t j = i + 1; j < modes.size(); ++j) {
          const Waypoint& b = modes[j].points[2];
          raw += std::hypot(c * (a.x - b.x), c * (a.y - b.y));
        }
      }
      raw *= 2.0 / double(modes.size() * (modes.size() - 1));
      mag /= double(modes.size());
      double expect = std::min(1.0, raw / (1e-6 + mag));

      std::vector<Trajectory> scaled = modes;
      for (auto& t : scaled)
        for (auto& p : t.points) {
          p.x *= c;
          p.y *= c;
        }
      CHECK(diversity_metric(set_of(scaled), 2) ==
            doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("collision fractions per timestamp") {
  SafetyField clear = const_field(10.0);
  SafetyField blocked = const_field(0.0);

  std::vector<Trajectory> corpus;
  for (int i = 0; i < 4; ++i)
    corpus.push_back(traj_xs({{0, 0}, {1, 0}, {2, 0}}));

  std::vector<const SafetyField*> all_clear = {&clear, &clear, &clear, &clear};
  CollisionReport rep = collision_rate(corpus, all_clear, 0.5);
  REQUIRE(rep.per_t.size() == 3);
  for (double f : rep.per_t) CHECK(f == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.average == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<const SafetyField*> all_blocked = {&blocked, &blocked, &blocked,
                                                 &blocked};
  CollisionReport worst = collision_rate(corpus, all_blocked, 0.5);
  for (double f : worst.per_t) CHECK(f == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(worst.average == doctest::Approx(1.0).epsilon(1e-12));

  // scene 2 violates at step 1 only: clearance sits below threshold there
  std::vector<Trajectory> mixed = corpus;
  mixed[2] = traj_xs({{0, 0}, {-20, 0}, {2, 0}});  // clamps to border cell
  SafetyField edge = const_field(10.0);
  for (size_t r = 0; r < edge.rows; ++r) edge.values[r * edge.cols] = 0.0;
  std::vector<const SafetyField*> fields = {&clear, &clear, &edge, &clear};
  CollisionReport one = collision_rate(mixed, fields, 0.5);
  CHECK(one.per_t[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(one.per_t[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(one.per_t[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(one.average == doctest::Approx(0.25 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(collision_rate({}, {}, 0.5), InvalidCorpus);
  std::vector<const SafetyField*> short_fields = {&clear};
  CHECK_THROWS_AS(collision_rate(corpus, short_fields, 0.5), InvalidCorpus);
}

TEST_CASE("collision rate grows with the threshold") {
  Rng rng(21);
  SafetyField f;
  f.origin = {0, 0};
  f.cell = 1.0;
  f.rows = 8;
  f.cols = 8;
  f.values.resize(f.rows * f.cols);
  for (double& v : f.values) v = rng.uniform(0, 3);

  std::vector<Trajectory> corpus;
  for (int i = 0; i < 10; ++i) {
    Trajectory t;
    for (int k = 0; k < 4; ++k)
      t.points.push_back({rng.uniform(0, 7), rng.uniform(0, 7)});
    corpus.push_back(t);
  }
  std::vector<const SafetyField*> fields(corpus.size(), &f);
  double prev = 0.0;
  for (double thresh : {0.2, 0.5, 1.0, 1.8, 2.6}) {
    double avg = collision_rate(corpus, fields, thresh).average;
    CHECK(avg >= prev);
    prev = avg;
  }
}

TEST_CASE("mode covariance trace diagnostics") {
  TrajectorySet same = set_of({traj_xs({{3, -2}}), traj_xs({{3, -2}})});
  CHECK(collapse_diagnostic(same).trace == doctest::Approx(0.0).epsilon(1e-12));

  // flattened 1D pair at -1 and +1: mean 0, two-point variance 1
  TrajectorySet pair = set_of({traj_xs({{-1, 0}}), traj_xs({{1, 0}})});
  CollapseReport two = collapse_diagnostic(pair);
  CHECK(two.trace == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(two.mean[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(two.mean[1] == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(17);
  std::vector<Trajectory> modes;
  for (int m = 0; m < 5; ++m) {
    Trajectory t;
    for (int i = 0; i < 3; ++i)
      t.points.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
    modes.push_back(t);
  }
  double base = collapse_diagnostic(set_of(modes)).trace;
  double c = 2.5;
  std::vector<Trajectory> scaled = modes;
  for (auto& t : scaled)
    for (auto& p : t.points) {
      p.x *= c;
      p.y *= c;
    }
  CHECK(collapse_diagnostic(set_of(scaled)).trace ==
        doctest::Approx(c * c * base).epsilon(1e-9));

  // trace vanishes only when every mode coincides
  CHECK(base > 1e-12);
  std::vector<Trajectory> collapsed(4, modes[0]);
  CHECK(collapse_diagnostic(set_of(collapsed)).trace <= 1e-12);
}

TEST_CASE("literal cross-covariance form against a target") {
  TrajectorySet pair = set_of({traj_xs({{-1, 0}}), traj_xs({{1, 0}})});
  Trajectory gt = traj_xs({{2, 0}});
  CollapseReport rep = collapse_diagnostic(pair, &gt);
  CHECK(rep.has_cross);
  // mean mu = (0,0); cross term averages (tau_x)(gt_x - 0) over modes: 0
  CHECK(rep.cross_trace == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.trace == doctest::Approx(1.0).epsilon(1e-12));

  Trajectory bad = traj_xs({{2, 0}, {3, 0}});
  CHECK_THROWS_AS(collapse_diagnostic(pair, &bad), InvalidPair);
}

TEST_CASE("mean waypoint error") {
  Trajectory gt = traj_xs({{1, 1}, {2, 2}});
  CHECK(avg_l2(gt, gt) == doctest::Approx(0.0).epsilon(1e-12));

  Trajectory shifted = traj_xs({{2, 1}, {3, 2}});
  CHECK(avg_l2(shifted, gt) == doctest::Approx(1.0).epsilon(1e-12));

  Trajectory mixed = traj_xs({{2, 1}, {2, 4}});  // offsets (1,0) then (0,2)
  CHECK(avg_l2(mixed, gt) == doctest::Approx(1.5).epsilon(1e-12));

  Trajectory shorter = traj_xs({{0, 0}});
  CHECK_THROWS_AS(avg_l2(shorter, gt), InvalidPair);
}
