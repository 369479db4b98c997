#include "transmot/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace transmot {

void SparseWeightedGraph::add_edge(int i, int j, double weight) {
  if (i == j) throw std::invalid_argument("self-loops are implicit");
  if (i < 0 || j < 0 || i >= num_nodes || j >= num_nodes) {
    throw std::out_of_range("edge endpoint out of range");
  }
  if (weight <= 0.0 || weight > 1.0) {
    throw std::invalid_argument("edge weight must be in (0,1]");
  }
  edges.push_back({std::min(i, j), std::max(i, j), weight});
}

bool SparseWeightedGraph::connected(int i, int j) const {
  if (i == j) return true;
  const int a = std::min(i, j), b = std::max(i, j);
  for (const auto& e : edges) {
    if (e.i == a && e.j == b) return true;
  }
  return false;
}

double SparseWeightedGraph::edge_weight(int i, int j) const {
  if (i == j) return 1.0;
  const int a = std::min(i, j), b = std::max(i, j);
  for (const auto& e : edges) {
    if (e.i == a && e.j == b) return e.weight;
  }
  return 0.0;
}

SparseWeightedGraph build_tracklet_graph(int num_nodes,
                                         const std::vector<std::pair<int, BoundingBox>>& boxes) {
  if (num_nodes < 1) throw std::invalid_argument("tracklet graph needs at least one node");
  SparseWeightedGraph g;
  g.num_nodes = num_nodes;
  for (std::size_t a = 0; a < boxes.size(); ++a) {
    for (std::size_t b = a + 1; b < boxes.size(); ++b) {
      if (boxes[a].first == boxes[b].first) {
        throw std::invalid_argument("duplicate node index in tracklet graph");
      }
      const double w = iou(boxes[a].second, boxes[b].second);
      if (w > 0.0) g.add_edge(boxes[a].first, boxes[b].first, w);
    }
  }
  return g;
}

SparseWeightedGraph build_candidate_graph(const std::vector<Detection>& detections) {
  const int m = static_cast<int>(detections.size());
  SparseWeightedGraph g;
  g.num_nodes = m + 1;
  g.has_virtual_sink = true;
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      const double w = iou(detections[a].bbox, detections[b].bbox);
      if (w > 0.0) g.add_edge(a, b, w);
    }
  }
  for (int a = 0; a < m; ++a) g.add_edge(a, m, 0.5);
  return g;
}

Tensor dense_adjacency(const SparseWeightedGraph& g) {
  const int n = g.num_nodes;
  std::vector<double> w(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i) * n + i] = 1.0;
  for (const auto& e : g.edges) {
    w[static_cast<std::size_t>(e.i) * n + e.j] = e.weight;
    w[static_cast<std::size_t>(e.j) * n + e.i] = e.weight;
  }
  return Tensor::from({n, n}, std::move(w));
}

Tensor adjacency_mask(const SparseWeightedGraph& g) {
  const int n = g.num_nodes;
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i) * n + i] = 1.0;
  for (const auto& e : g.edges) {
    m[static_cast<std::size_t>(e.i) * n + e.j] = 1.0;
    m[static_cast<std::size_t>(e.j) * n + e.i] = 1.0;
  }
  return Tensor::from({n, n}, std::move(m));
}

Tensor scaled_laplacian(const SparseWeightedGraph& g) {
  const int n = g.num_nodes;
  Tensor adj = dense_adjacency(g);
  const auto& a = adj.values();
  std::vector<double> inv_sqrt_deg(n);
  for (int i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int j = 0; j < n; ++j) deg += a[static_cast<std::size_t>(i) * n + j];
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);  // deg >= 1 from the self-loop
  }
  std::vector<double> lhat(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      lhat[static_cast<std::size_t>(i) * n + j] =
          -inv_sqrt_deg[i] * a[static_cast<std::size_t>(i) * n + j] * inv_sqrt_deg[j];
    }
  }
  return Tensor::from({n, n}, std::move(lhat));
}

}  // namespace transmot
