#pragma once
#include <string>
#include <vector>

#include "diver/core.hpp"
#include "diver/scene.hpp"

namespace diver {

// Static top-down picture of one scene: map polylines, agent discs, the
// clearance contour at d_thresh, ground truth, stored references, and any
// predicted modes (color-indexed). Pure function of its inputs, so the byte
// output is reproducible.
std::string render_scene_svg(const Scene& scene,
                             const std::vector<Trajectory>& modes,
                             double d_thresh);

}  // namespace diver
