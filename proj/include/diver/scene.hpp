#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "diver/core.hpp"

namespace diver {

struct AgentState {
  Waypoint position;
  double vx = 0.0;
  double vy = 0.0;
  double radius = 1.0;
};

// Dense distance-to-nearest-obstacle grid over a fixed rectangle. Cell (r, c)
// holds the Euclidean clearance at the cell center; origin is the center of
// cell (0, 0). rows run along y, cols along x.
struct SafetyField {
  Waypoint origin;
  double cell = 0.5;
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;  // rows * cols, row-major

  double at(size_t r, size_t c) const { return values[r * cols + c]; }
};

// Value for fields built with no obstacles at all.
constexpr double kNoObstacleSentinel = 1e6;

// Bilinear interpolation over cell centers; queries outside the covered
// rectangle are clamped to the border (reported through `clamped`).
double query_safety(const SafetyField& field, const Waypoint& p,
                    bool* clamped = nullptr);

enum class SceneTemplate { Straight, LeftTurn, RightTurn, Obstacle, Merge };

const char* template_name(SceneTemplate t);
SceneTemplate template_from_name(const std::string& name);  // InvalidConfig

// Convention for map_polylines: every polyline except the last two is a lane
// centerline; the final two are the left/right drivable boundaries. The
// drivable corridor is the set of points within corridor_half_width of some
// centerline.
struct Scene {
  std::string scene_id;
  std::string template_id;
  std::vector<std::vector<Waypoint>> map_polylines;
  std::vector<AgentState> agents;
  Waypoint goal;
  Trajectory gt;
  std::vector<Trajectory> reference_gts;
  std::vector<Trajectory> anchors;
  SafetyField safety_field;
  double corridor_half_width = 3.5;
};

struct SceneGenParams {
  int horizon = 6;
  double dt = 0.5;
  int modes = 6;   // anchors carried by the scene
  int k_ref = 6;   // reference trajectories, 1..8
  double corridor_half_width = 3.5;
  double cell_size = 0.5;
  double min_x = -10.0, max_x = 60.0;
  double min_y = -20.0, max_y = 20.0;
  double d_thresh = 0.5;  // clearance the gt and references must respect
};

// Distance from p to the nearest lane centerline of the scene.
double corridor_distance(const Scene& scene, const Waypoint& p);

// Exact brute-force clearance grid: disks for agents plus the boundary
// polylines as segment chains. With no obstacles every cell holds the
// sentinel value.
SafetyField build_safety_field(const std::vector<AgentState>& agents,
                               const std::vector<std::vector<Waypoint>>& boundaries,
                               double min_x, double max_x, double min_y,
                               double max_y, double cell_size);

// Deterministic synthetic scene: template maneuver at 5-12 m/s, off-path
// agents, goal at the last gt waypoint, k_ref reference variants and a fixed
// per-scene anchor vocabulary (batch tooling replaces it with corpus k-means
// centers).
Scene generate_scene(uint64_t seed, SceneTemplate tmpl,
                     const SceneGenParams& params = {},
                     const std::string& id = "");

// k corridor-constrained variants of scene.gt differing in lateral offset
// (up to +-1.5 m), terminal speed (up to +-30%) or maneuver onset (up to +-2
// steps). Element 0 is the unmodified gt; prefixes are nested, so asking for
// k and k+1 agree on the first k. All variants are collision-free and
// pairwise at least 0.5 m apart in flattened L2 (InsufficientDiversity
// otherwise).
std::vector<Trajectory> generate_reference_gts(const Scene& scene, int k,
                                               uint64_t seed,
                                               const SceneGenParams& params = {});

// Lloyd k-means (k-means++ seeding, fixed iteration budget) over flattened
// gts of the corpus. Centers are pairwise distinct; corpus smaller than m is
// InsufficientData.
std::vector<Trajectory> generate_anchors(const std::vector<Scene>& corpus,
                                         int m, uint64_t seed = 0x5eedull);

// JSON round-trip. Deserialization re-validates the Scene invariants.
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace diver
