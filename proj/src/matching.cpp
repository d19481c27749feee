#include "diver/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace diver {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Potentials-based Kuhn-Munkres on rows 0..n-1. cost may contain kInf for
// forbidden cells (used by the lexicographic refinement below). Returns the
// optimal total, or kInf if no finite perfect matching exists.
double solve(const std::vector<std::vector<double>>& cost,
             std::vector<int>& rowsol) {
  int n = int(cost.size());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, n), way(n + 1, 0);  // p[j] = row matched to col j
  for (int i = 0; i < n; ++i) {
    p[n] = i;
    int j0 = n;  // virtual start column
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      int i0 = p[j0], j1 = -1;
      double delta = kInf;
      for (int j = 0; j < n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 < 0 || delta == kInf) return kInf;  // no augmenting path
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != n);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != n);
  }
  rowsol.assign(n, -1);
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    if (p[j] < n) {
      rowsol[p[j]] = j;
      total += cost[p[j]][j];
    }
  }
  return total;
}

}  // namespace

Assignment hungarian(const std::vector<std::vector<double>>& cost) {
  int n = int(cost.size());
  if (n == 0) throw InvalidCost("empty cost matrix");
  for (const auto& row : cost) {
    if (int(row.size()) != n) throw InvalidCost("cost matrix not square");
    for (double c : row)
      if (!std::isfinite(c)) throw InvalidCost("non-finite cost entry");
  }

  std::vector<int> sol;
  double best = solve(cost, sol);

  // Fix columns row by row, smallest column index first, keeping only choices
  // that still admit a completion at the optimal total. This pins ties to the
  // lexicographically smallest permutation.
  double tol = 1e-9 * std::max(1.0, std::fabs(best));
  std::vector<std::vector<double>> work = cost;
  std::vector<char> col_taken(n, false);
  Assignment out;
  out.row_to_col.assign(n, -1);
  double fixed_cost = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (col_taken[j]) continue;
      double saved_row_cost = cost[i][j];
      // tentatively force (i -> j): forbid the rest of row i and column j
      std::vector<double> old_row = work[i];
      for (int jj = 0; jj < n; ++jj) work[i][jj] = (jj == j) ? 0.0 : kInf;
      std::vector<double> old_col(n);
      for (int ii = 0; ii < n; ++ii) {
        old_col[ii] = work[ii][j];
        if (ii != i) work[ii][j] = kInf;
      }
      std::vector<int> sub;
      double rest = solve(work, sub);
      if (fixed_cost + saved_row_cost + rest <= best + tol) {
        out.row_to_col[i] = j;
        col_taken[j] = true;
        fixed_cost += saved_row_cost;
        break;  // keep the forced structure in `work`
      }
      // undo
      work[i] = old_row;
      for (int ii = 0; ii < n; ++ii) work[ii][j] = old_col[ii];
    }
  }
  out.total_cost = fixed_cost;
  return out;
}

MatchResult match_loss(const std::vector<Trajectory>& preds,
                       const std::vector<Trajectory>& refs) {
  if (preds.empty()) throw InvalidBatch("no predictions to match");
  if (refs.empty()) throw InvalidBatch("no references to match");
  size_t m = preds.size();
  size_t t_len = preds[0].points.size();
  for (const auto& p : preds)
    if (p.points.size() != t_len) throw InvalidPair("prediction lengths differ");
  for (const auto& r : refs)
    if (r.points.size() != t_len)
      throw InvalidPair("reference length differs from predictions");

  MatchResult res;
  std::vector<const Trajectory*> slots;
  slots.reserve(m);
  for (size_t i = 0; i < m; ++i) slots.push_back(&refs[i % refs.size()]);
  res.padded = refs.size() < m;
  res.dropped = refs.size() > m ? int(refs.size() - m) : 0;

  std::vector<std::vector<double>> cost(m, std::vector<double>(m, 0.0));
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j)
      cost[i][j] = flat_sq_distance(preds[i], *slots[j]);

  res.assignment = hungarian(cost);
  res.loss = res.assignment.total_cost / double(m);

  res.matched_refs.reserve(m);
  res.grads.assign(m, std::vector<double>(2 * t_len, 0.0));
  for (size_t i = 0; i < m; ++i) {
    const Trajectory& ref = *slots[size_t(res.assignment.row_to_col[i])];
    res.matched_refs.push_back(ref);
    for (size_t k = 0; k < t_len; ++k) {
      res.grads[i][2 * k] = 2.0 * (preds[i].points[k].x - ref.points[k].x) / double(m);
      res.grads[i][2 * k + 1] = 2.0 * (preds[i].points[k].y - ref.points[k].y) / double(m);
    }
  }
  return res;
}

}  // namespace diver
