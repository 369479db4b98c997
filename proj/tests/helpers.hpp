#pragma once

// Shared test utilities: finite-difference oracles, dense attention
// reference, brute-force assignment enumeration, small random builders.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "transmot/geometry.hpp"
#include "transmot/graph.hpp"
#include "transmot/tensor.hpp"

namespace testutil {

// Central finite difference of `loss` w.r.t. one entry of `param`.
inline double finite_diff(transmot::Tensor& param, std::size_t index,
                          const std::function<double()>& loss, double step = 1e-5) {
  auto& values = param.mutable_values();
  const double saved = values[index];
  values[index] = saved + step;
  const double up = loss();
  values[index] = saved - step;
  const double down = loss();
  values[index] = saved;
  return (up - down) / (2.0 * step);
}

// Max relative error |analytic - fd| / max(1, |analytic|) over every
// entry of `param`. The loss closure must rebuild the graph from scratch.
inline double gradcheck_tensor(transmot::Tensor& param,
                               const std::function<transmot::Tensor()>& make_loss,
                               double step = 1e-5) {
  param.zero_grad();
  make_loss().backward();
  const std::vector<double> analytic = param.grad();
  double worst = 0.0;
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double fd =
        finite_diff(param, i, [&] { return make_loss().item(); }, step);
    worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i])));
  }
  param.zero_grad();
  return worst;
}

inline transmot::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng,
                                      bool requires_grad = false, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  std::vector<double> v(transmot::shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return transmot::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline transmot::BoundingBox random_box(std::mt19937_64& rng, double span = 100.0) {
  std::uniform_real_distribution<double> pos(0.0, span);
  std::uniform_real_distribution<double> size(5.0, 40.0);
  return {pos(rng), pos(rng), size(rng), size(rng)};
}

// Plain-double reference for one frame of graph multi-head attention:
// dense N x N scores, IoU weighting, -inf masking off the edge set,
// row softmax, cheb value path, concat, output projection. Completely
// independent of the Tensor op implementations.
inline std::vector<double> dense_graph_attention_reference(
    const std::vector<double>& f, int n, int d, int heads, const transmot::SparseWeightedGraph& g,
    const std::vector<double>& wq, const std::vector<double>& wk, const std::vector<double>& cheb0,
    const std::vector<double>& cheb1, const std::vector<double>& wo, const std::vector<double>& bo) {
  const int dh = d / heads;

  // Weighted adjacency with self-loops and the scaled Laplacian.
  std::vector<double> adj(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) adj[static_cast<std::size_t>(i) * n + i] = 1.0;
  for (const auto& e : g.edges) {
    adj[static_cast<std::size_t>(e.i) * n + e.j] = e.weight;
    adj[static_cast<std::size_t>(e.j) * n + e.i] = e.weight;
  }
  std::vector<double> lhat(static_cast<std::size_t>(n) * n, 0.0);
  {
    std::vector<double> dsqrt(n);
    for (int i = 0; i < n; ++i) {
      double deg = 0.0;
      for (int j = 0; j < n; ++j) deg += adj[static_cast<std::size_t>(i) * n + j];
      dsqrt[i] = 1.0 / std::sqrt(deg);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        lhat[static_cast<std::size_t>(i) * n + j] =
            -dsqrt[i] * adj[static_cast<std::size_t>(i) * n + j] * dsqrt[j];
  }

  auto matmul_nd = [&](const std::vector<double>& a, int rows, int inner,
                       const std::vector<double>& b, int cols) {
    std::vector<double> out(static_cast<std::size_t>(rows) * cols, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < inner; ++k)
        for (int j = 0; j < cols; ++j)
          out[static_cast<std::size_t>(i) * cols + j] +=
              a[static_cast<std::size_t>(i) * inner + k] * b[static_cast<std::size_t>(k) * cols + j];
    return out;
  };
  const std::vector<double> qf = matmul_nd(f, n, d, wq, d);
  const std::vector<double> kf = matmul_nd(f, n, d, wk, d);
  const std::vector<double> v0 = matmul_nd(f, n, d, cheb0, d);
  const std::vector<double> lf = matmul_nd(lhat, n, n, f, d);
  const std::vector<double> v1 = matmul_nd(lf, n, d, cheb1, d);

  std::vector<double> ctx(static_cast<std::size_t>(n) * d, 0.0);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < n; ++i) {
      // scores for row i, head h
      std::vector<double> row(n, -std::numeric_limits<double>::infinity());
      double hi = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        if (adj[static_cast<std::size_t>(i) * n + j] == 0.0 && i != j) continue;
        double dot = 0.0;
        for (int c = 0; c < dh; ++c) {
          dot += qf[static_cast<std::size_t>(i) * d + h * dh + c] *
                 kf[static_cast<std::size_t>(j) * d + h * dh + c];
        }
        row[j] = dot / std::sqrt(static_cast<double>(dh)) * adj[static_cast<std::size_t>(i) * n + j];
        hi = std::max(hi, row[j]);
      }
      double denom = 0.0;
      for (int j = 0; j < n; ++j) {
        if (std::isfinite(row[j])) denom += std::exp(row[j] - hi);
      }
      for (int j = 0; j < n; ++j) {
        if (!std::isfinite(row[j])) continue;
        const double w = std::exp(row[j] - hi) / denom;
        for (int c = 0; c < dh; ++c) {
          ctx[static_cast<std::size_t>(i) * d + h * dh + c] +=
              w * (v0[static_cast<std::size_t>(j) * d + h * dh + c] +
                   v1[static_cast<std::size_t>(j) * d + h * dh + c]);
        }
      }
    }
  }
  std::vector<double> out = matmul_nd(ctx, n, d, wo, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) out[static_cast<std::size_t>(i) * d + c] += bo[c];
  return out;
}

// All injective row->column assignments of an m x n matrix (m <= n
// handled by recursion; m > n enumerates column->row instead).
inline double brute_force_assignment(const std::vector<std::vector<double>>& cost, bool maximize) {
  const int m = static_cast<int>(cost.size());
  const int n = m > 0 ? static_cast<int>(cost[0].size()) : 0;
  if (m == 0 || n == 0) return 0.0;
  const int k = std::min(m, n);
  std::vector<int> wide(std::max(m, n));
  std::iota(wide.begin(), wide.end(), 0);
  double best = maximize ? -1e300 : 1e300;
  // Permute the larger side; take the first k against the smaller side.
  std::sort(wide.begin(), wide.end());
  do {
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
      total += (m <= n) ? cost[i][wide[i]] : cost[wide[i]][i];
    }
    best = maximize ? std::max(best, total) : std::min(best, total);
  } while (std::next_permutation(wide.begin(), wide.end()));
  return best;
}

// Jacobi eigenvalues of a symmetric matrix (test-side PSD checks).
inline std::vector<double> symmetric_eigenvalues(std::vector<double> a, int n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a[p * n + q]) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * a[p * n + q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1.0 / std::sqrt(t * t + 1), s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a[i * n + p], aiq = a[i * n + q];
          a[i * n + p] = c * aip - s * aiq;
          a[i * n + q] = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a[p * n + i], aqi = a[q * n + i];
          a[p * n + i] = c * api - s * aqi;
          a[q * n + i] = s * api + c * aqi;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (int i = 0; i < n; ++i) eig[i] = a[i * n + i];
  return eig;
}

}  // namespace testutil
