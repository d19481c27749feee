#include "diver/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "diver/rng.hpp"

namespace diver {
namespace {

double point_segment_distance(const Waypoint& p, const Waypoint& a,
                              const Waypoint& b) {
  double abx = b.x - a.x, aby = b.y - a.y;
  double apx = p.x - a.x, apy = p.y - a.y;
  double len2 = abx * abx + aby * aby;
  double t = len2 > 0.0 ? std::clamp((apx * abx + apy * aby) / len2, 0.0, 1.0) : 0.0;
  double dx = apx - t * abx, dy = apy - t * aby;
  return std::sqrt(dx * dx + dy * dy);
}

double polyline_distance(const Waypoint& p, const std::vector<Waypoint>& line) {
  double best = std::numeric_limits<double>::infinity();
  if (line.size() == 1) {
    double dx = p.x - line[0].x, dy = p.y - line[0].y;
    return std::sqrt(dx * dx + dy * dy);
  }
  for (size_t i = 0; i + 1 < line.size(); ++i)
    best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  return best;
}

// Nominal path geometry of one template instance plus the gt's lateral
// profile. arc lengths are measured along the centerline.
struct PathSpec {
  SceneTemplate tmpl = SceneTemplate::Straight;
  double v = 8.0;  // nominal speed, m/s
  double L = 24.0; // gt arc length = v * T * dt
  // turns
  double theta = 0.0, lead = 0.0, arclen = 0.0, radius = 0.0;
  // merge
  double merge_w = 0.0, merge_x0 = 0.0, merge_len = 1.0;
  // straight wiggle
  double wiggle_amp = 0.0, wiggle_lambda = 30.0, wiggle_phase = 0.0;
  // obstacle swerve (gt moves to -side of the parked agent)
  double bump_amp = 0.0, bump_x = 0.0, bump_w = 5.0, bump_side = 1.0;
};

double smooth01(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

Waypoint centerline_at(const PathSpec& ps, double s) {
  switch (ps.tmpl) {
    case SceneTemplate::LeftTurn:
    case SceneTemplate::RightTurn: {
      double sign = ps.theta >= 0.0 ? 1.0 : -1.0;
      double th = std::fabs(ps.theta);
      if (s <= ps.lead) return {s, 0.0};
      if (s <= ps.lead + ps.arclen) {
        double phi = th * (s - ps.lead) / ps.arclen;
        return {ps.lead + ps.radius * std::sin(phi),
                sign * ps.radius * (1.0 - std::cos(phi))};
      }
      double rest = s - ps.lead - ps.arclen;
      Waypoint end{ps.lead + ps.radius * std::sin(th),
                   sign * ps.radius * (1.0 - std::cos(th))};
      return {end.x + rest * std::cos(th), end.y + sign * rest * std::sin(th)};
    }
    case SceneTemplate::Merge:
      return {s, ps.merge_w * smooth01((s - ps.merge_x0) / ps.merge_len)};
    default:
      return {s, 0.0};
  }
}

void frame_at(const PathSpec& ps, double s, Waypoint* tangent, Waypoint* normal) {
  const double h = 0.01;
  Waypoint a = centerline_at(ps, s - h), b = centerline_at(ps, s + h);
  double tx = b.x - a.x, ty = b.y - a.y;
  double len = std::sqrt(tx * tx + ty * ty);
  if (len < 1e-12) {
    tx = 1.0;
    ty = 0.0;
    len = 1.0;
  }
  tx /= len;
  ty /= len;
  if (tangent) *tangent = {tx, ty};
  if (normal) *normal = {-ty, tx};  // left normal
}

double lateral_profile(const PathSpec& ps, double s) {
  switch (ps.tmpl) {
    case SceneTemplate::Straight:
      return ps.wiggle_amp *
             std::sin(2.0 * M_PI * s / ps.wiggle_lambda + ps.wiggle_phase);
    case SceneTemplate::Obstacle: {
      double u = (s - ps.bump_x) / ps.bump_w;
      return -ps.bump_side * ps.bump_amp * std::exp(-u * u);
    }
    default:
      return 0.0;
  }
}

Waypoint path_point(const PathSpec& ps, double s, double lateral_extra) {
  Waypoint n;
  frame_at(ps, s, nullptr, &n);
  Waypoint c = centerline_at(ps, s);
  double lat = lateral_profile(ps, s) + lateral_extra;
  return {c.x + n.x * lat, c.y + n.y * lat};
}

// gt-style waypoints: arc-length progression at speed v ramped linearly to
// speed_factor * v at the horizon, lateral offset added on top of the
// template profile.
Trajectory rollout(const PathSpec& ps, int horizon, double dt,
                   double lateral_offset, double speed_factor) {
  Trajectory out;
  out.dt = dt;
  out.points.reserve(size_t(horizon));
  double s = 0.0;
  for (int k = 1; k <= horizon; ++k) {
    double vk = ps.v * (1.0 + (speed_factor - 1.0) * double(k) / double(horizon));
    s += vk * dt;
    out.points.push_back(path_point(ps, s, lateral_offset));
  }
  return out;
}

std::vector<Waypoint> sample_offset_polyline(const PathSpec& ps, double s_lo,
                                             double s_hi, double offset) {
  std::vector<Waypoint> line;
  for (double s = s_lo; s <= s_hi + 1e-9; s += 1.0) {
    Waypoint n;
    frame_at(ps, s, nullptr, &n);
    Waypoint c = centerline_at(ps, s);
    line.push_back({c.x + n.x * offset, c.y + n.y * offset});
  }
  return line;
}

double min_field_clearance(const SafetyField& f, const Trajectory& t) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& p : t.points) worst = std::min(worst, query_safety(f, p));
  return worst;
}

// Fixed per-scene anchor vocabulary: arcs fanned over turn angle and speed.
// Pure function of (m, horizon, dt) so every scene agrees until corpus-level
// clustering replaces them.
std::vector<Trajectory> prototype_anchors(int m, int horizon, double dt) {
  std::vector<Trajectory> out;
  out.reserve(size_t(m));
  for (int j = 0; j < m; ++j) {
    double frac = m > 1 ? double(j) / double(m - 1) : 0.5;
    double psi = (-60.0 + 120.0 * frac) * M_PI / 180.0;
    double v = 6.0 + 5.0 * frac;
    Trajectory t;
    t.dt = dt;
    double x = 0.0, y = 0.0;
    for (int k = 1; k <= horizon; ++k) {
      double phi = psi * (double(k) - 0.5) / double(horizon);
      x += v * dt * std::cos(phi);
      y += v * dt * std::sin(phi);
      t.points.push_back({x, y});
    }
    out.push_back(std::move(t));
  }
  return out;
}

struct RefCandidate {
  enum Kind { Lateral, Speed, Onset } kind;
  double lateral = 0.0;
  double speed_factor = 1.0;
  int onset_steps = 0;
};

// Ordered parameter stream for reference variants; interleaves the three
// perturbation axes and leaves plenty of slack past the 8 slots callers use.
const std::vector<RefCandidate>& ref_candidate_stream() {
  static const std::vector<RefCandidate> stream = {
      {RefCandidate::Lateral, 0.9, 1.0, 0},
      {RefCandidate::Lateral, -0.9, 1.0, 0},
      {RefCandidate::Speed, 0.0, 1.3, 0},
      {RefCandidate::Speed, 0.0, 0.7, 0},
      {RefCandidate::Lateral, 1.5, 1.0, 0},
      {RefCandidate::Lateral, -1.5, 1.0, 0},
      {RefCandidate::Onset, 0.45, 1.0, -1},
      {RefCandidate::Speed, 0.0, 1.15, 0},
      {RefCandidate::Lateral, 1.2, 1.0, 0},
      {RefCandidate::Onset, -0.45, 1.0, 1},
      {RefCandidate::Lateral, -1.2, 1.0, 0},
      {RefCandidate::Speed, 0.0, 0.85, 0},
      {RefCandidate::Lateral, 0.5, 1.0, 0},
      {RefCandidate::Lateral, -0.5, 1.0, 0},
      {RefCandidate::Onset, 0.6, 1.0, -2},
      {RefCandidate::Speed, 0.0, 1.22, 0},
      {RefCandidate::Lateral, 0.7, 1.0, 0},
      {RefCandidate::Lateral, -0.7, 1.0, 0},
      {RefCandidate::Onset, -0.6, 1.0, 2},
      {RefCandidate::Speed, 0.0, 0.78, 0},
      {RefCandidate::Lateral, 1.35, 1.0, 0},
      {RefCandidate::Lateral, -1.35, 1.0, 0},
      {RefCandidate::Lateral, 0.3, 1.0, 0},
      {RefCandidate::Lateral, -0.3, 1.0, 0},
  };
  return stream;
}

PathSpec build_path_spec(Rng& rng, SceneTemplate tmpl, const SceneGenParams& p) {
  PathSpec ps;
  ps.tmpl = tmpl;
  bool is_turn = tmpl == SceneTemplate::LeftTurn || tmpl == SceneTemplate::RightTurn;
  ps.v = is_turn ? rng.uniform(5.0, 9.0) : rng.uniform(5.0, 12.0);
  ps.L = ps.v * p.horizon * p.dt;
  switch (tmpl) {
    case SceneTemplate::Straight:
      ps.wiggle_amp = rng.uniform(0.0, 0.25);
      ps.wiggle_lambda = rng.uniform(15.0, 40.0);
      ps.wiggle_phase = rng.uniform(0.0, 2.0 * M_PI);
      break;
    case SceneTemplate::LeftTurn:
    case SceneTemplate::RightTurn: {
      double sign = tmpl == SceneTemplate::LeftTurn ? 1.0 : -1.0;
      double th = rng.uniform(70.0, 110.0) * M_PI / 180.0;
      ps.theta = sign * th;
      ps.lead = 0.2 * ps.L;
      ps.arclen = 0.6 * ps.L;
      ps.radius = ps.arclen / th;
      break;
    }
    case SceneTemplate::Obstacle:
      ps.bump_side = rng.next_double() < 0.5 ? 1.0 : -1.0;
      ps.bump_amp = rng.uniform(1.1, 1.4);
      ps.bump_x = 0.55 * ps.L;
      ps.bump_w = 5.0;
      break;
    case SceneTemplate::Merge: {
      double side = rng.next_double() < 0.5 ? 1.0 : -1.0;
      ps.merge_w = side * 3.5;
      ps.merge_x0 = 0.25 * ps.L;
      ps.merge_len = 0.5 * ps.L;
      break;
    }
  }
  return ps;
}

}  // namespace

const char* template_name(SceneTemplate t) {
  switch (t) {
    case SceneTemplate::Straight: return "Straight";
    case SceneTemplate::LeftTurn: return "LeftTurn";
    case SceneTemplate::RightTurn: return "RightTurn";
    case SceneTemplate::Obstacle: return "Obstacle";
    case SceneTemplate::Merge: return "Merge";
  }
  return "Straight";
}

SceneTemplate template_from_name(const std::string& name) {
  if (name == "Straight") return SceneTemplate::Straight;
  if (name == "LeftTurn") return SceneTemplate::LeftTurn;
  if (name == "RightTurn") return SceneTemplate::RightTurn;
  if (name == "Obstacle") return SceneTemplate::Obstacle;
  if (name == "Merge") return SceneTemplate::Merge;
  throw InvalidConfig("unknown scene template: " + name);
}

double query_safety(const SafetyField& field, const Waypoint& p, bool* clamped) {
  if (field.rows == 0 || field.cols == 0)
    throw InvalidDim("empty safety field");
  double gx = (p.x - field.origin.x) / field.cell;
  double gy = (p.y - field.origin.y) / field.cell;
  bool clip = false;
  if (gx < 0.0) { gx = 0.0; clip = true; }
  if (gy < 0.0) { gy = 0.0; clip = true; }
  if (gx > double(field.cols - 1)) { gx = double(field.cols - 1); clip = true; }
  if (gy > double(field.rows - 1)) { gy = double(field.rows - 1); clip = true; }
  if (clamped) *clamped = clip;
  size_t c0 = size_t(gx), r0 = size_t(gy);
  size_t c1 = std::min(c0 + 1, field.cols - 1);
  size_t r1 = std::min(r0 + 1, field.rows - 1);
  double fx = gx - double(c0), fy = gy - double(r0);
  double v00 = field.at(r0, c0), v01 = field.at(r0, c1);
  double v10 = field.at(r1, c0), v11 = field.at(r1, c1);
  double a = v00 * (1.0 - fx) + v01 * fx;
  double b = v10 * (1.0 - fx) + v11 * fx;
  return a * (1.0 - fy) + b * fy;
}

double corridor_distance(const Scene& scene, const Waypoint& p) {
  if (scene.map_polylines.size() < 3)
    throw InvalidDim("scene needs centerlines plus two boundaries");
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 2 < scene.map_polylines.size(); ++i)
    best = std::min(best, polyline_distance(p, scene.map_polylines[i]));
  return best;
}

SafetyField build_safety_field(const std::vector<AgentState>& agents,
                               const std::vector<std::vector<Waypoint>>& boundaries,
                               double min_x, double max_x, double min_y,
                               double max_y, double cell_size) {
  if (!(cell_size > 0.0) || !(max_x > min_x) || !(max_y > min_y))
    throw InvalidDim("bad safety field geometry");
  SafetyField f;
  f.cell = cell_size;
  f.cols = size_t(std::floor((max_x - min_x) / cell_size)) + 1;
  f.rows = size_t(std::floor((max_y - min_y) / cell_size)) + 1;
  f.origin = {min_x + 0.5 * cell_size, min_y + 0.5 * cell_size};
  f.values.assign(f.rows * f.cols, kNoObstacleSentinel);

  bool any = !agents.empty();
  for (const auto& b : boundaries) any = any || !b.empty();
  if (!any) return f;

  for (size_t r = 0; r < f.rows; ++r) {
    for (size_t c = 0; c < f.cols; ++c) {
      Waypoint p{f.origin.x + double(c) * cell_size,
                 f.origin.y + double(r) * cell_size};
      double d = std::numeric_limits<double>::infinity();
      for (const auto& a : agents) {
        double dx = p.x - a.position.x, dy = p.y - a.position.y;
        d = std::min(d, std::max(0.0, std::sqrt(dx * dx + dy * dy) - a.radius));
      }
      for (const auto& b : boundaries)
        if (!b.empty()) d = std::min(d, polyline_distance(p, b));
      f.values[r * f.cols + c] = d;
    }
  }
  return f;
}

std::vector<Trajectory> generate_reference_gts(const Scene& scene, int k,
                                               uint64_t seed,
                                               const SceneGenParams& params) {
  if (k < 1) throw InvalidConfig("k must be at least 1");
  validate_trajectory(scene.gt);

  // The scene's template geometry is rebuilt from its stored id + seed by the
  // caller (generate_scene); standalone callers get corridor/safety checked
  // variants built by perturbing the gt polyline directly.
  std::vector<Trajectory> refs;
  refs.push_back(scene.gt);
  if (k == 1) return refs;

  Rng rng(derive_seed(seed, 0x9ef5));
  const auto& stream = ref_candidate_stream();
  int horizon = int(scene.gt.points.size());

  // local frames along the gt for lateral perturbation
  std::vector<Waypoint> normals(static_cast<size_t>(horizon));
  for (int i = 0; i < horizon; ++i) {
    Waypoint a = i > 0 ? scene.gt.points[size_t(i - 1)] : Waypoint{0.0, 0.0};
    Waypoint b = scene.gt.points[size_t(i)];
    if (i + 1 < horizon &&
        std::hypot(b.x - a.x, b.y - a.y) < 1e-9)
      b = scene.gt.points[size_t(i + 1)];
    double tx = b.x - a.x, ty = b.y - a.y;
    double len = std::max(1e-9, std::sqrt(tx * tx + ty * ty));
    normals[size_t(i)] = {-ty / len, tx / len};
  }

  const double margin = 0.7;
  const double clearance = params.d_thresh + 0.1;

  for (const auto& cand : stream) {
    if (int(refs.size()) >= k) break;
    double jitter = rng.uniform(-0.1, 0.1);  // drawn for every candidate
    Trajectory var;
    var.dt = scene.gt.dt;
    var.points.resize(size_t(horizon));
    if (cand.kind == RefCandidate::Lateral || cand.kind == RefCandidate::Onset) {
      double off = cand.lateral + (cand.kind == RefCandidate::Lateral ? jitter : 0.0);
      int shift = cand.onset_steps;
      for (int i = 0; i < horizon; ++i) {
        int src = std::clamp(i + shift, 0, horizon - 1);
        Waypoint base = scene.gt.points[size_t(src)];
        var.points[size_t(i)] = {base.x + normals[size_t(i)].x * off,
                                 base.y + normals[size_t(i)].y * off};
      }
    } else {  // terminal speed scaling along the gt's own polyline
      double f = cand.speed_factor + jitter * 0.2;
      // chain p_0 = origin, p_i = gt.points[i-1]; arc[i] = length up to p_i
      std::vector<Waypoint> chain(size_t(horizon) + 1);
      chain[0] = {0.0, 0.0};
      for (int i = 0; i < horizon; ++i) chain[size_t(i) + 1] = scene.gt.points[size_t(i)];
      std::vector<double> arc(chain.size(), 0.0);
      for (size_t i = 1; i < chain.size(); ++i)
        arc[i] = arc[i - 1] + std::hypot(chain[i].x - chain[i - 1].x,
                                         chain[i].y - chain[i - 1].y);
      double total = arc.back();
      auto at_arc = [&](double target) -> Waypoint {
        if (target >= total) {  // extrapolate along the last leg
          const Waypoint& a = chain[chain.size() - 2];
          const Waypoint& b = chain.back();
          double seg = std::max(1e-9, std::hypot(b.x - a.x, b.y - a.y));
          double ext = (target - total) / seg;
          return {b.x + (b.x - a.x) * ext, b.y + (b.y - a.y) * ext};
        }
        size_t j = 1;
        while (j + 1 < chain.size() && arc[j] < target) ++j;
        const Waypoint& a = chain[j - 1];
        const Waypoint& b = chain[j];
        double seg = std::max(1e-9, arc[j] - arc[j - 1]);
        double u = std::clamp((target - arc[j - 1]) / seg, 0.0, 1.0);
        return {a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u};
      };
      double step0 = total / double(horizon);
      double s = 0.0;
      for (int i = 1; i <= horizon; ++i) {
        s += step0 * (1.0 + (f - 1.0) * double(i) / double(horizon));
        var.points[size_t(i - 1)] = at_arc(s);
      }
    }

    // validity: inside corridor, collision-free, distinct from accepted
    bool ok = true;
    for (const auto& p : var.points) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y) ||
          std::fabs(p.x) > kSceneBound || std::fabs(p.y) > kSceneBound) {
        ok = false;
        break;
      }
      if (corridor_distance(scene, p) > scene.corridor_half_width - margin) {
        ok = false;
        break;
      }
    }
    if (ok && min_field_clearance(scene.safety_field, var) < clearance) ok = false;
    if (ok)
      for (const auto& r : refs)
        if (flat_distance(var, r) < 0.5) {
          ok = false;
          break;
        }
    if (ok) refs.push_back(std::move(var));
  }

  if (int(refs.size()) < k)
    throw InsufficientDiversity("could not build " + std::to_string(k) +
                                " distinct admissible references");
  return refs;
}

Scene generate_scene(uint64_t seed, SceneTemplate tmpl,
                     const SceneGenParams& params, const std::string& id) {
  if (params.horizon < 2 || params.modes < 1 || params.k_ref < 1 ||
      params.k_ref > 8)
    throw InvalidConfig("bad scene generation parameters");

  Rng rng(derive_seed(seed, 0x5ce2e));
  Scene scene;
  scene.template_id = template_name(tmpl);
  scene.corridor_half_width = params.corridor_half_width;
  if (id.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%016llx",
                  static_cast<unsigned long long>(seed));
    scene.scene_id = buf;
  } else {
    scene.scene_id = id;
  }

  PathSpec ps = build_path_spec(rng, tmpl, params);
  scene.gt = rollout(ps, params.horizon, params.dt, 0.0, 1.0);
  scene.goal = scene.gt.points.back();

  // map polylines: centerlines first, the two drivable boundaries last
  double s_lo = -5.0, s_hi = ps.L + 8.0;
  double w = params.corridor_half_width;
  if (tmpl == SceneTemplate::Merge) {
    scene.map_polylines.push_back(sample_offset_polyline(ps, s_lo, s_hi, 0.0));
    std::vector<Waypoint> lane0, lane1;
    for (double s = s_lo; s <= s_hi + 1e-9; s += 1.0) {
      lane0.push_back({s, 0.0});
      lane1.push_back({s, ps.merge_w});
    }
    scene.map_polylines.push_back(lane0);
    scene.map_polylines.push_back(lane1);
    double lo_y = std::min(0.0, ps.merge_w) - w;
    double hi_y = std::max(0.0, ps.merge_w) + w;
    std::vector<Waypoint> lower, upper;
    for (double s = s_lo; s <= s_hi + 1e-9; s += 1.0) {
      lower.push_back({s, lo_y});
      upper.push_back({s, hi_y});
    }
    scene.map_polylines.push_back(lower);
    scene.map_polylines.push_back(upper);
  } else {
    scene.map_polylines.push_back(sample_offset_polyline(ps, s_lo, s_hi, 0.0));
    scene.map_polylines.push_back(sample_offset_polyline(ps, s_lo, s_hi, w));
    scene.map_polylines.push_back(sample_offset_polyline(ps, s_lo, s_hi, -w));
  }

  // agents parked well off the corridor, moving parallel to the lane
  int extra_agents = 1 + rng.next_int(3);
  for (int i = 0; i < extra_agents; ++i) {
    double s_a = rng.uniform(0.2, 0.9) * ps.L;
    double side = rng.next_double() < 0.5 ? 1.0 : -1.0;
    double off = rng.uniform(5.5, 10.0);
    Waypoint tang, norm;
    frame_at(ps, s_a, &tang, &norm);
    Waypoint c = centerline_at(ps, s_a);
    AgentState a;
    a.position = {c.x + norm.x * side * off, c.y + norm.y * side * off};
    double sp = rng.uniform(0.0, 8.0);
    a.vx = tang.x * sp;
    a.vy = tang.y * sp;
    a.radius = rng.uniform(0.8, 1.5);
    scene.agents.push_back(a);
  }
  if (tmpl == SceneTemplate::Obstacle) {
    Waypoint norm;
    frame_at(ps, ps.bump_x, nullptr, &norm);
    Waypoint c = centerline_at(ps, ps.bump_x);
    AgentState a;
    a.position = {c.x + norm.x * ps.bump_side * 1.1,
                  c.y + norm.y * ps.bump_side * 1.1};
    a.vx = 0.0;
    a.vy = 0.0;
    a.radius = rng.uniform(0.8, 1.1);
    scene.agents.push_back(a);
  }

  std::vector<std::vector<Waypoint>> boundaries(scene.map_polylines.end() - 2,
                                                scene.map_polylines.end());
  scene.safety_field =
      build_safety_field(scene.agents, boundaries, params.min_x, params.max_x,
                         params.min_y, params.max_y, params.cell_size);

  // invariants the construction promises
  validate_trajectory(scene.gt);
  for (const auto& p : scene.gt.points)
    if (corridor_distance(scene, p) > w - 0.5)
      throw Error("generated gt left the corridor");
  if (min_field_clearance(scene.safety_field, scene.gt) < params.d_thresh)
    throw Error("generated gt violates clearance");

  scene.reference_gts =
      generate_reference_gts(scene, params.k_ref, derive_seed(seed, 0x2ef5), params);
  scene.anchors = prototype_anchors(params.modes, params.horizon, params.dt);
  return scene;
}

std::vector<Trajectory> generate_anchors(const std::vector<Scene>& corpus,
                                         int m, uint64_t seed) {
  if (corpus.empty()) throw InsufficientData("empty corpus");
  if (m < 1) throw InvalidConfig("m must be positive");
  if (int(corpus.size()) < m)
    throw InsufficientData("corpus smaller than requested anchor count");
  size_t t_len = corpus[0].gt.points.size();
  double dt = corpus[0].gt.dt;
  std::vector<std::vector<double>> pts;
  pts.reserve(corpus.size());
  for (const auto& s : corpus) {
    if (s.gt.points.size() != t_len)
      throw InvalidCorpus("corpus gts disagree on horizon");
    pts.push_back(flatten(s.gt));
  }
  size_t n = pts.size(), dim = 2 * t_len;

  auto sq_dist = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < dim; ++i) {
      double d = a[i] - b[i];
      s += d * d;
    }
    return s;
  };

  // k-means++ seeding
  Rng rng(derive_seed(seed, 0xc105));
  std::vector<std::vector<double>> centers;
  centers.push_back(pts[rng.next_int(int(n))]);
  std::vector<double> d2(n);
  while (int(centers.size()) < m) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, sq_dist(pts[i], c));
      d2[i] = best;
      total += best;
    }
    if (total <= 1e-12) {
      // remaining points coincide with chosen centers; pick the first point
      // not yet used as a center, if any
      bool placed = false;
      for (size_t i = 0; i < n && !placed; ++i) {
        bool dup = false;
        for (const auto& c : centers)
          if (sq_dist(pts[i], c) <= 1e-12) {
            dup = true;
            break;
          }
        if (!dup) {
          centers.push_back(pts[i]);
          placed = true;
        }
      }
      if (!placed)
        throw InsufficientData("fewer distinct gts than requested anchors");
      continue;
    }
    double r = rng.next_double() * total;
    size_t pick = n - 1;
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= r) {
        pick = i;
        break;
      }
    }
    centers.push_back(pts[pick]);
  }

  // Lloyd iterations with deterministic tie-breaks
  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 40; ++iter) {
    bool moved = false;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < m; ++c) {
        double d = sq_dist(pts[i], centers[size_t(c)]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        moved = true;
      }
    }
    for (int c = 0; c < m; ++c) {
      std::vector<double> mean(dim, 0.0);
      size_t cnt = 0;
      for (size_t i = 0; i < n; ++i)
        if (assign[i] == c) {
          for (size_t k = 0; k < dim; ++k) mean[k] += pts[i][k];
          ++cnt;
        }
      if (cnt == 0) {
        // reseed on the point farthest from every center
        size_t far = 0;
        double fd = -1.0;
        for (size_t i = 0; i < n; ++i) {
          double best = std::numeric_limits<double>::infinity();
          for (const auto& cc : centers) best = std::min(best, sq_dist(pts[i], cc));
          if (best > fd) {
            fd = best;
            far = i;
          }
        }
        centers[size_t(c)] = pts[far];
        continue;
      }
      for (size_t k = 0; k < dim; ++k) mean[k] /= double(cnt);
      centers[size_t(c)] = std::move(mean);
    }
    if (!moved && iter > 0) break;
  }

  std::vector<Trajectory> out;
  out.reserve(size_t(m));
  for (int c = 0; c < m; ++c) {
    Trajectory t;
    t.dt = dt;
    for (size_t k = 0; k < t_len; ++k)
      t.points.push_back({centers[size_t(c)][2 * k], centers[size_t(c)][2 * k + 1]});
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace diver
