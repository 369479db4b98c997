#pragma once

#include <vector>

namespace transmot {

/// Row-major cost matrix for the assignment solver.
struct CostMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  CostMatrix() = default;
  CostMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct AssignmentResult {
  std::vector<std::pair<int, int>> pairs;  // (row, col), every row of min(rows,cols) matched
  double total = 0.0;
};

/// Optimal linear assignment via shortest augmenting paths. Rectangular
/// inputs are padded internally; each of the min(rows, cols) smaller-side
/// elements is matched. Costs must be finite.
AssignmentResult hungarian(const CostMatrix& cost, bool maximize = false);

}  // namespace transmot
