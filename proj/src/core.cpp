#include "diver/core.hpp"

#include <cmath>

namespace diver {

void validate_waypoint(const Waypoint& w) {
  if (!std::isfinite(w.x) || !std::isfinite(w.y))
    throw InvalidTrajectory("waypoint has non-finite coordinate");
  if (std::fabs(w.x) > kSceneBound || std::fabs(w.y) > kSceneBound)
    throw InvalidTrajectory("waypoint outside scene bounds");
}

void validate_trajectory(const Trajectory& t) {
  if (t.points.empty()) throw InvalidTrajectory("empty trajectory");
  if (!(t.dt > 0.0) || !std::isfinite(t.dt))
    throw InvalidTrajectory("non-positive dt");
  for (const auto& w : t.points) validate_waypoint(w);
}

void validate_schedule(const NoiseSchedule& s) {
  size_t n = size_t(s.num_steps);
  if (s.num_steps <= 0) throw InvalidSchedule("num_steps must be positive");
  if (s.betas.size() != n || s.alphas.size() != n || s.alpha_bars.size() != n)
    throw InvalidSchedule("schedule array sizes disagree with num_steps");
  double prod = 1.0;
  for (size_t t = 0; t < n; ++t) {
    double b = s.betas[t];
    if (!(b >= 0.0) || !(b < 1.0) || !std::isfinite(b))
      throw InvalidSchedule("beta outside [0,1)");
    if (std::fabs(s.alphas[t] - (1.0 - b)) > 1e-12)
      throw InvalidSchedule("alphas inconsistent with betas");
    prod *= s.alphas[t];
    if (std::fabs(s.alpha_bars[t] - prod) > 1e-9)
      throw InvalidSchedule("alpha_bars not the running product");
    if (!(s.alpha_bars[t] > 0.0) || s.alpha_bars[t] > 1.0)
      throw InvalidSchedule("alpha_bar outside (0,1]");
    if (t > 0 && !(s.alpha_bars[t] < s.alpha_bars[t - 1]))
      throw InvalidSchedule("alpha_bars must decrease strictly");
  }
}

Trajectory cumulative_sum(const Trajectory& deltas) {
  Trajectory out;
  out.dt = deltas.dt;
  out.points.reserve(deltas.points.size());
  double x = 0.0, y = 0.0;
  for (const auto& d : deltas.points) {
    if (!std::isfinite(d.x) || !std::isfinite(d.y))
      throw InvalidTrajectory("non-finite displacement");
    x += d.x;
    y += d.y;
    out.points.push_back({x, y});
  }
  return out;
}

Trajectory displacements(const Trajectory& absolute) {
  Trajectory out;
  out.dt = absolute.dt;
  out.points.reserve(absolute.points.size());
  double px = 0.0, py = 0.0;
  for (const auto& p : absolute.points) {
    out.points.push_back({p.x - px, p.y - py});
    px = p.x;
    py = p.y;
  }
  return out;
}

Trajectory normalize(const Trajectory& t, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw InvalidScale("scale must be positive and finite");
  Trajectory out;
  out.dt = t.dt;
  out.points.reserve(t.points.size());
  for (const auto& p : t.points) out.points.push_back({p.x / scale, p.y / scale});
  return out;
}

Trajectory denormalize(const Trajectory& t, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw InvalidScale("scale must be positive and finite");
  Trajectory out;
  out.dt = t.dt;
  out.points.reserve(t.points.size());
  for (const auto& p : t.points) out.points.push_back({p.x * scale, p.y * scale});
  return out;
}

std::vector<double> flatten(const Trajectory& t) {
  std::vector<double> out;
  out.reserve(2 * t.points.size());
  for (const auto& p : t.points) {
    out.push_back(p.x);
    out.push_back(p.y);
  }
  return out;
}

double flat_sq_distance(const Trajectory& a, const Trajectory& b) {
  if (a.points.size() != b.points.size())
    throw InvalidPair("trajectory lengths differ");
  double s = 0.0;
  for (size_t i = 0; i < a.points.size(); ++i) {
    double dx = a.points[i].x - b.points[i].x;
    double dy = a.points[i].y - b.points[i].y;
    s += dx * dx + dy * dy;
  }
  return s;
}

double flat_distance(const Trajectory& a, const Trajectory& b) {
  return std::sqrt(flat_sq_distance(a, b));
}

}  // namespace diver
