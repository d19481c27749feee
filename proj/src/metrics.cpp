#include "diver/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace diver {

double diversity_metric(const TrajectorySet& set, int t_index) {
  size_t m = set.modes.size();
  if (m < 2) throw InvalidSet("diversity needs at least two modes");
  if (t_index < 0 || size_t(t_index) >= set.modes[0].points.size())
    throw InvalidSet("timestamp outside the horizon");

  size_t t = size_t(t_index);
  double raw = 0.0;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = i + 1; j < m; ++j) {
      double dx = set.modes[i].points[t].x - set.modes[j].points[t].x;
      double dy = set.modes[i].points[t].y - set.modes[j].points[t].y;
      raw += std::sqrt(dx * dx + dy * dy);
    }
  raw *= 2.0 / (double(m) * double(m - 1));

  double mag = 0.0;
  for (size_t i = 0; i < m; ++i)
    mag += std::hypot(set.modes[i].points[t].x, set.modes[i].points[t].y);
  mag /= double(m);

  return std::min(1.0, raw / (1e-6 + mag));
}

CollisionReport collision_rate(const std::vector<Trajectory>& chosen,
                               const std::vector<const SafetyField*>& fields,
                               double d_thresh) {
  if (chosen.empty()) throw InvalidCorpus("empty evaluation corpus");
  if (chosen.size() != fields.size())
    throw InvalidCorpus("corpus and field counts differ");
  size_t T = chosen[0].points.size();
  for (const auto& t : chosen)
    if (t.points.size() != T)
      throw InvalidCorpus("mixed horizons in evaluation corpus");

  CollisionReport out;
  out.per_t.assign(T, 0.0);
  for (size_t s = 0; s < chosen.size(); ++s)
    for (size_t t = 0; t < T; ++t)
      if (query_safety(*fields[s], chosen[s].points[t]) < d_thresh)
        out.per_t[t] += 1.0;
  for (double& v : out.per_t) v /= double(chosen.size());
  for (double v : out.per_t) out.average += v;
  out.average /= double(T);
  return out;
}

CollapseReport collapse_diagnostic(const TrajectorySet& set,
                                   const Trajectory* gt) {
  size_t m = set.modes.size();
  if (m < 2) throw InvalidSet("collapse diagnostic needs at least two modes");
  size_t n = 2 * set.modes[0].points.size();

  CollapseReport out;
  out.mean.assign(n, 0.0);
  std::vector<std::vector<double>> flat;
  flat.reserve(m);
  for (const auto& mode : set.modes) {
    flat.push_back(flatten(mode));
    for (size_t k = 0; k < n; ++k) out.mean[k] += flat.back()[k];
  }
  for (double& v : out.mean) v /= double(m);

  // trace of E[(tau - mu)(tau - mu)^T] is just the mean squared deviation
  for (const auto& f : flat)
    for (size_t k = 0; k < n; ++k) {
      double d = f[k] - out.mean[k];
      out.trace += d * d;
    }
  out.trace /= double(m);

  if (gt) {
    auto g = flatten(*gt);
    if (g.size() != n) throw InvalidPair("target length differs from modes");
    out.has_cross = true;
    for (const auto& f : flat)
      for (size_t k = 0; k < n; ++k)
        out.cross_trace += (f[k] - out.mean[k]) * (g[k] - out.mean[k]);
    out.cross_trace /= double(m);
  }
  return out;
}

double avg_l2(const Trajectory& pred, const Trajectory& gt) {
  if (pred.points.size() != gt.points.size() || pred.points.empty())
    throw InvalidPair("avg_l2 needs equal nonzero lengths");
  double total = 0.0;
  for (size_t t = 0; t < pred.points.size(); ++t)
    total += std::hypot(pred.points[t].x - gt.points[t].x,
                        pred.points[t].y - gt.points[t].y);
  return total / double(pred.points.size());
}

}  // namespace diver
