#pragma once
#include <string>
#include <vector>

#include "diver/core.hpp"
#include "diver/errors.hpp"

namespace diver {

// One JSON object per line: {"scene_id", "mode", "dt", "points"}. Modes of a
// set occupy consecutive lines in index order.
std::string trajectory_sets_to_jsonl(const std::vector<TrajectorySet>& sets);
void save_trajectory_sets(const std::string& path,
                          const std::vector<TrajectorySet>& sets);

// Consecutive lines sharing a scene_id fold back into one set. Malformed
// lines raise IoError naming the 1-based line number.
std::vector<TrajectorySet> trajectory_sets_from_jsonl(const std::string& text);
std::vector<TrajectorySet> load_trajectory_sets(const std::string& path);

}  // namespace diver
