#include <fstream>
#include <sstream>

#include "diver/scene.hpp"
#include "json.hpp"

namespace diver {
namespace {

using nlohmann::json;

json points_to_json(const std::vector<Waypoint>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(json::array({p.x, p.y}));
  return arr;
}

std::vector<Waypoint> points_from_json(const json& arr) {
  std::vector<Waypoint> out;
  for (const auto& p : arr) {
    if (!p.is_array() || p.size() != 2)
      throw IoError("point must be a [x, y] pair");
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

json traj_to_json(const Trajectory& t) { return points_to_json(t.points); }

Trajectory traj_from_json(const json& arr, double dt) {
  Trajectory t;
  t.dt = dt;
  t.points = points_from_json(arr);
  return t;
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
  json j;
  j["id"] = scene.scene_id;
  j["template"] = scene.template_id;
  j["dt"] = scene.gt.dt;
  j["corridor_half_width"] = scene.corridor_half_width;
  json polys = json::array();
  for (const auto& line : scene.map_polylines) polys.push_back(points_to_json(line));
  j["polylines"] = polys;
  json agents = json::array();
  for (const auto& a : scene.agents) {
    json ja;
    ja["pos"] = json::array({a.position.x, a.position.y});
    ja["vel"] = json::array({a.vx, a.vy});
    ja["radius"] = a.radius;
    agents.push_back(ja);
  }
  j["agents"] = agents;
  j["goal"] = json::array({scene.goal.x, scene.goal.y});
  j["gt"] = traj_to_json(scene.gt);
  json refs = json::array();
  for (const auto& r : scene.reference_gts) refs.push_back(traj_to_json(r));
  j["refs"] = refs;
  json anchors = json::array();
  for (const auto& a : scene.anchors) anchors.push_back(traj_to_json(a));
  j["anchors"] = anchors;
  json safety;
  safety["origin"] = json::array({scene.safety_field.origin.x, scene.safety_field.origin.y});
  safety["cell"] = scene.safety_field.cell;
  json rows = json::array();
  for (size_t r = 0; r < scene.safety_field.rows; ++r) {
    json row = json::array();
    for (size_t c = 0; c < scene.safety_field.cols; ++c)
      row.push_back(scene.safety_field.at(r, c));
    rows.push_back(row);
  }
  safety["rows"] = rows;
  j["safety"] = safety;
  return j.dump();
}

Scene scene_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw IoError(std::string("scene JSON parse failed: ") + e.what());
  }
  Scene scene;
  try {
    scene.scene_id = j.at("id").get<std::string>();
    scene.template_id = j.value("template", std::string("Straight"));
    double dt = j.value("dt", 0.5);
    scene.corridor_half_width = j.value("corridor_half_width", 3.5);
    for (const auto& line : j.at("polylines"))
      scene.map_polylines.push_back(points_from_json(line));
    for (const auto& a : j.at("agents")) {
      AgentState st;
      auto pos = a.at("pos");
      st.position = {pos[0].get<double>(), pos[1].get<double>()};
      auto vel = a.at("vel");
      st.vx = vel[0].get<double>();
      st.vy = vel[1].get<double>();
      st.radius = a.at("radius").get<double>();
      scene.agents.push_back(st);
    }
    auto goal = j.at("goal");
    scene.goal = {goal[0].get<double>(), goal[1].get<double>()};
    scene.gt = traj_from_json(j.at("gt"), dt);
    for (const auto& r : j.at("refs"))
      scene.reference_gts.push_back(traj_from_json(r, dt));
    for (const auto& a : j.at("anchors"))
      scene.anchors.push_back(traj_from_json(a, dt));
    auto safety = j.at("safety");
    auto origin = safety.at("origin");
    scene.safety_field.origin = {origin[0].get<double>(), origin[1].get<double>()};
    scene.safety_field.cell = safety.at("cell").get<double>();
    const auto& rows = safety.at("rows");
    scene.safety_field.rows = rows.size();
    scene.safety_field.cols = rows.empty() ? 0 : rows[0].size();
    for (const auto& row : rows) {
      if (row.size() != scene.safety_field.cols)
        throw IoError("ragged safety grid");
      for (const auto& v : row)
        scene.safety_field.values.push_back(v.get<double>());
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("scene JSON malformed: ") + e.what());
  }

  // re-validate the invariants the type promises
  validate_trajectory(scene.gt);
  if (scene.reference_gts.empty()) throw IoError("scene has no references");
  if (scene.anchors.empty()) throw IoError("scene has no anchors");
  size_t t_len = scene.gt.points.size();
  for (const auto& r : scene.reference_gts) {
    validate_trajectory(r);
    if (r.points.size() != t_len) throw IoError("reference horizon mismatch");
  }
  for (const auto& a : scene.anchors) {
    validate_trajectory(a);
    if (a.points.size() != t_len) throw IoError("anchor horizon mismatch");
  }
  if (scene.map_polylines.size() < 3)
    throw IoError("scene needs at least one centerline and two boundaries");
  if (scene.safety_field.rows == 0 || scene.safety_field.cols == 0 ||
      scene.safety_field.values.size() !=
          scene.safety_field.rows * scene.safety_field.cols)
    throw IoError("inconsistent safety grid");
  double gx = scene.goal.x - scene.gt.points.back().x;
  double gy = scene.goal.y - scene.gt.points.back().y;
  if (gx * gx + gy * gy > 1e-12) throw IoError("goal is not the last gt waypoint");
  for (const auto& r : scene.reference_gts)
    for (const auto& p : r.points)
      if (corridor_distance(scene, p) > scene.corridor_half_width + 1e-6)
        throw IoError("reference leaves the drivable corridor");
  return scene;
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << scene_to_json(scene) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

}  // namespace diver
