#include "transmot/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace transmot {

namespace {

// Kuhn-Munkres on a square matrix via successive shortest augmenting
// paths with dual potentials, O(n^3). Returns col index per row.
std::vector<int> solve_square(const std::vector<double>& cost, int n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0);  // match[j] = row assigned to column j, 1-based
  std::vector<int> way(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (match[j]) row_to_col[match[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

AssignmentResult hungarian(const CostMatrix& cost, bool maximize) {
  for (double c : cost.data) {
    if (!std::isfinite(c)) throw std::invalid_argument("hungarian: costs must be finite");
  }
  AssignmentResult result;
  if (cost.rows == 0 || cost.cols == 0) return result;

  // Pad to square; padded cells cost 0, so they never change the optimum
  // over the real block.
  const int n = std::max(cost.rows, cost.cols);
  std::vector<double> square(static_cast<std::size_t>(n) * n, 0.0);
  const double sign = maximize ? -1.0 : 1.0;
  for (int r = 0; r < cost.rows; ++r) {
    for (int c = 0; c < cost.cols; ++c) {
      square[static_cast<std::size_t>(r) * n + c] = sign * cost.at(r, c);
    }
  }

  const std::vector<int> row_to_col = solve_square(square, n);
  for (int r = 0; r < cost.rows; ++r) {
    const int c = row_to_col[r];
    if (c >= 0 && c < cost.cols) {
      result.pairs.emplace_back(r, c);
      result.total += cost.at(r, c);
    }
  }
  return result;
}

}  // namespace transmot
