#pragma once

#include <utility>
#include <vector>

#include "transmot/geometry.hpp"
#include "transmot/tensor.hpp"

namespace transmot {

/// Undirected IoU-weighted spatial graph over tracklets or candidates.
///
/// Every node carries a weight-1 self-loop so masked attention never sees
/// an empty row. When has_virtual_sink is set, the last node is the sink
/// and is connected to every real node with weight 0.5.
struct SparseWeightedGraph {
  struct Edge {
    int i;
    int j;
    double weight;
  };

  int num_nodes = 0;
  std::vector<Edge> edges;  // stored once per unordered pair, i < j
  bool has_virtual_sink = false;

  int sink_index() const { return has_virtual_sink ? num_nodes - 1 : -1; }
  void add_edge(int i, int j, double weight);
  bool connected(int i, int j) const;  // self-loops count as connected
  double edge_weight(int i, int j) const;
};

/// Graph over tracklet boxes at one frame: edge (i,j,IoU) iff IoU > 0.
/// Indices absent from `boxes` become isolated nodes (self-loop only).
SparseWeightedGraph build_tracklet_graph(int num_nodes,
                                         const std::vector<std::pair<int, BoundingBox>>& boxes);

/// Graph over the frame's detections plus a trailing virtual sink node.
SparseWeightedGraph build_candidate_graph(const std::vector<Detection>& detections);

/// Symmetric dense weight matrix with unit diagonal; zero where no edge.
Tensor dense_adjacency(const SparseWeightedGraph& g);

/// 0/1 connectivity mask (self-loops included), same layout as
/// dense_adjacency.
Tensor adjacency_mask(const SparseWeightedGraph& g);

/// Scaled normalized Laplacian used by the Chebyshev value path:
/// L_hat = 2 L / lambda_max - I with L = I - D^{-1/2} A D^{-1/2} and
/// lambda_max fixed at 2, i.e. L_hat = -D^{-1/2} A D^{-1/2}.
Tensor scaled_laplacian(const SparseWeightedGraph& g);

}  // namespace transmot
