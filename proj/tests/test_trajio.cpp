#include "diver/trajio.hpp"
#include "doctest.h"

using namespace diver;

namespace {

TrajectorySet make_set(const std::string& id, int modes, double shift) {
  TrajectorySet s;
  s.scene_id = id;
  for (int m = 0; m < modes; ++m) {
    Trajectory t;
    t.dt = 0.5;
    for (int i = 0; i < 3; ++i)
      t.points.push_back({shift + m + 0.25 * i, double(i)});
    s.modes.push_back(t);
  }
  return s;
}

}  // namespace

TEST_CASE("sets round trip through jsonl") {
  std::vector<TrajectorySet> sets = {make_set("scene_0000", 3, 0.0),
                                     make_set("scene_0001", 2, 10.0)};
  std::string text = trajectory_sets_to_jsonl(sets);
  std::vector<TrajectorySet> back = trajectory_sets_from_jsonl(text);

  REQUIRE(back.size() == 2);
  CHECK(back[0].scene_id == "scene_0000");
  CHECK(back[1].scene_id == "scene_0001");
  REQUIRE(back[0].modes.size() == 3);
  REQUIRE(back[1].modes.size() == 2);
  for (size_t s = 0; s < sets.size(); ++s)
    for (size_t m = 0; m < sets[s].modes.size(); ++m) {
      CHECK(back[s].modes[m].dt == sets[s].modes[m].dt);
      REQUIRE(back[s].modes[m].points.size() ==
              sets[s].modes[m].points.size());
      for (size_t i = 0; i < sets[s].modes[m].points.size(); ++i) {
        CHECK(back[s].modes[m].points[i].x == sets[s].modes[m].points[i].x);
        CHECK(back[s].modes[m].points[i].y == sets[s].modes[m].points[i].y);
      }
    }
}

TEST_CASE("one object per line, grouped by scene") {
  std::vector<TrajectorySet> sets = {make_set("a", 2, 0.0)};
  std::string text = trajectory_sets_to_jsonl(sets);
  size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  CHECK(lines == 2);
  CHECK(text.find("\"scene_id\"") != std::string::npos);
  CHECK(text.find("\"mode\"") != std::string::npos);
}

TEST_CASE("a leading header line is passed over") {
  std::string text =
      "{\"config_hash\":\"00000000000000aa\"}\n"
      "{\"scene_id\":\"s\",\"mode\":0,\"dt\":0.5,\"points\":[[1,2],[3,4]]}\n";
  std::vector<TrajectorySet> back = trajectory_sets_from_jsonl(text);
  REQUIRE(back.size() == 1);
  REQUIRE(back[0].modes.size() == 1);
  CHECK(back[0].modes[0].points[1].y == 4.0);
}

TEST_CASE("bad lines are reported by number") {
  std::string text =
      "{\"scene_id\":\"s\",\"mode\":0,\"dt\":0.5,\"points\":[[1,2]]}\n"
      "{oops\n";
  try {
    trajectory_sets_from_jsonl(text);
    FAIL("expected a parse failure");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  CHECK_THROWS_AS(
      trajectory_sets_from_jsonl("{\"points\":[[1,2]]}\n"),
      IoError);
}
