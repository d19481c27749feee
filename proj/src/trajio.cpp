#include "diver/trajio.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace diver {

using nlohmann::json;

std::string trajectory_sets_to_jsonl(const std::vector<TrajectorySet>& sets) {
  std::ostringstream out;
  for (const auto& set : sets) {
    for (size_t m = 0; m < set.modes.size(); ++m) {
      const Trajectory& t = set.modes[m];
      json line;
      line["scene_id"] = set.scene_id;
      line["mode"] = m;
      line["dt"] = t.dt;
      json pts = json::array();
      for (const auto& p : t.points) pts.push_back(json::array({p.x, p.y}));
      line["points"] = pts;
      out << line.dump() << "\n";
    }
  }
  return out.str();
}

void save_trajectory_sets(const std::string& path,
                          const std::vector<TrajectorySet>& sets) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << trajectory_sets_to_jsonl(sets);
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<TrajectorySet> trajectory_sets_from_jsonl(const std::string& text) {
  std::vector<TrajectorySet> sets;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.is_object() && !j.contains("scene_id") && j.contains("config_hash"))
      continue;  // metadata line emitted by the sampling commands
    if (!j.is_object() || !j.contains("scene_id") || !j.contains("points"))
      throw IoError("line " + std::to_string(lineno) + ": missing scene_id or points");
    try {
      std::string id = j["scene_id"].get<std::string>();
      Trajectory t;
      t.dt = j.value("dt", 0.5);
      for (const auto& p : j["points"]) {
        if (!p.is_array() || p.size() != 2)
          throw IoError("point must be a [x, y] pair");
        t.points.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      if (sets.empty() || sets.back().scene_id != id) {
        TrajectorySet s;
        s.scene_id = id;
        sets.push_back(std::move(s));
      }
      sets.back().modes.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw IoError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return sets;
}

std::vector<TrajectorySet> load_trajectory_sets(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return trajectory_sets_from_jsonl(buf.str());
}

}  // namespace diver
