#pragma once

#include <utility>
#include <vector>

#include "transmot/encoder.hpp"

namespace transmot {

struct CrossAttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct DecoderParams {
  Tensor tgt_w, tgt_b;  // target embedding, D_in -> D
  Tensor sink_table;    // [1, D] learnable virtual-sink embedding
  Tensor source_table;  // [1, D] learnable virtual-source embedding
  GraphAttentionParams self_attn;
  LayerNormParams self_ln;
  CrossAttentionParams cross;
  LayerNormParams cross_ln;
  FeedForwardParams ffn;
  LayerNormParams ffn_ln;
  Tensor head_w, head_b;  // D -> 1 output head
};

DecoderParams make_decoder_params(const ModelConfig& cfg, ParameterStore& store,
                                  std::mt19937_64& rng);

/// Plain probability view of an assignment matrix, detached from the
/// autodiff graph. Rows 0..M-1 are per-candidate distributions over the
/// N tracklets plus the virtual-source column; the final row carries the
/// sink sigmoids.
struct AssignmentProbs {
  int rows = 0;  // M + 1
  int cols = 0;  // N + 1
  std::vector<double> data;

  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  int num_candidates() const { return rows - 1; }
  int num_tracklets() const { return cols - 1; }
};

/// Soft matching between M candidates (+ sink row) and N tracklets
/// (+ source column).
struct ExtendedAssignmentMatrix {
  Tensor logits;  // [M+1, N+1]
  int num_candidates = 0;
  int num_tracklets = 0;

  AssignmentProbs probs() const;
};

/// Candidate embedding with appended sink node, graph self-attention over
/// the candidate graph, cross-attention against the source-extended
/// encoder output, feed-forward, and the scalar output head.
ExtendedAssignmentMatrix decode(const SparseWeightedGraph& cand_graph, const Tensor& cand_features,
                                const Tensor& enc_out, const DecoderParams& p,
                                const ModelConfig& cfg);

struct HardAssignment {
  std::vector<std::pair<int, int>> pairs;  // (candidate, tracklet)
  std::vector<int> unmatched_candidates;
  std::vector<int> unmatched_tracklets;
};

/// Maximum-score bipartite matching over the M x N block; pairs at or
/// below the threshold are demoted to unmatched.
HardAssignment hard_assign(const AssignmentProbs& probs, double threshold);

}  // namespace transmot
