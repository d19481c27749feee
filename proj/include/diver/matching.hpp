#pragma once
#include <vector>

#include "diver/core.hpp"

namespace diver {

struct Assignment {
  std::vector<int> row_to_col;  // row_to_col[i] = matched column of row i
  double total_cost = 0.0;
};

// Exact minimum-cost perfect assignment on a square cost matrix (O(n^3)
// potentials method). Among all optimal assignments the lexicographically
// smallest permutation is returned, so ties never depend on float ordering
// quirks. Rejects non-square or non-finite input (InvalidCost).
Assignment hungarian(const std::vector<std::vector<double>>& cost);

struct MatchResult {
  double loss = 0.0;                      // mean matched squared distance
  Assignment assignment;                  // prediction i -> reference slot
  std::vector<Trajectory> matched_refs;   // reference matched to each prediction
  std::vector<std::vector<double>> grads; // dL/dpred, flattened 2T per mode
  bool padded = false;                    // refs were cycled to reach M
  int dropped = 0;                        // refs beyond M that were ignored
};

// Assigns each predicted mode to a distinct reference slot by minimum total
// squared flattened distance, then averages the matched costs. References are
// cycled when there are fewer than M and truncated when there are more; the
// gradient treats the assignment as fixed: dL/dpred = 2 (pred - matched) / M.
MatchResult match_loss(const std::vector<Trajectory>& preds,
                       const std::vector<Trajectory>& refs);

}  // namespace diver
