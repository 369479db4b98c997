#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "transmot/checkpoint.hpp"
#include "transmot/graph.hpp"
#include "transmot/tensor.hpp"

namespace transmot {

/// Dimensions shared by the encoder and decoder stacks.
struct ModelConfig {
  int appearance_dim = 8;  // F
  int embed_dim = 32;      // D
  int heads = 4;           // H, must divide D
  int window = 5;          // T
  int ffn_mult = 4;        // hidden width of feed-forward blocks = ffn_mult * D
  int spatial_layers = 1;
  int temporal_layers = 1;

  int input_dim() const { return appearance_dim + 4; }  // appearance ++ normalized box
  int head_dim() const { return embed_dim / heads; }
  void validate() const;
};

/// Per-tracklet node features over the attention window.
/// data rows with presence=false are all-zero.
struct TrackletFeatureTensor {
  Tensor data;                         // [N, T, D_in]
  std::vector<std::uint8_t> presence;  // N*T, row-major over (tracklet, frame)

  int num_tracklets() const { return data.size(0); }
  int window() const { return data.size(1); }
  bool present(int n, int t) const { return presence[static_cast<std::size_t>(n) * window() + t] != 0; }
};

struct LayerNormParams {
  Tensor gain, bias;
};

struct FeedForwardParams {
  Tensor w1, b1, w2, b2;  // D -> D_ff -> D
};

/// Graph multi-head attention weights: query/key projections plus the
/// Chebyshev value path, all stored as [D, D] with per-head column blocks.
struct GraphAttentionParams {
  Tensor wq, wk;
  Tensor cheb0, cheb1;
  Tensor wo, bo;
};

/// Standard multi-head self-attention over the time axis.
struct TemporalParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  FeedForwardParams ffn;
  LayerNormParams ln1, ln2;
};

struct SpatialLayerParams {
  GraphAttentionParams attn;
  LayerNormParams ln1, ln2;
  FeedForwardParams ffn;
};

struct EncoderParams {
  Tensor src_w, src_b;  // source embedding, D_in -> D
  std::vector<SpatialLayerParams> spatial;
  std::vector<TemporalParams> temporal;
  Tensor pos_encoding;  // [T, D] sinusoidal table, not trainable
};

EncoderParams make_encoder_params(const ModelConfig& cfg, ParameterStore& store,
                                  std::mt19937_64& rng);

/// Sinusoidal table over time indices 0..len-1.
Tensor sinusoidal_encoding(int len, int dim);

/// Linear source embedding per node; absent slots are re-zeroed.
Tensor embed_source(const TrackletFeatureTensor& x, const EncoderParams& p);  // [N,T,D]

/// Chebyshev graph convolution of order 2:
/// Y = F theta0 + L_hat F theta1, with L_hat from scaled_laplacian(g).
Tensor cheb_conv(const Tensor& f, const SparseWeightedGraph& g, const Tensor& theta0,
                 const Tensor& theta1);

/// One frame of graph multi-head attention: scaled dot-product scores
/// weighted by the graph's IoU edges, softmax restricted to the edge set
/// (exact zeros elsewhere), ChebConv value path, concat + output
/// projection.
Tensor spatial_graph_attention(const Tensor& f, const SparseWeightedGraph& g,
                               const GraphAttentionParams& p, int heads);  // [N,D] -> [N,D]

/// Attention applied frame-by-frame across the window.
Tensor graph_multi_head_attention_encoder(const Tensor& f_s,
                                          const std::vector<SparseWeightedGraph>& graphs,
                                          const GraphAttentionParams& p, int heads);  // [N,T,D]

/// Full spatial layer: attention, residual + norm, feed-forward,
/// residual + norm.
Tensor spatial_encoder_layer(const Tensor& f_s, const std::vector<SparseWeightedGraph>& graphs,
                             const SpatialLayerParams& p, int heads);  // [N,T,D]

/// Per-tracklet transformer encoder layer over time with key-padding from
/// the presence mask; output transposed to [T,N,D]. The sinusoidal
/// positional table is added by encode() before the first layer.
Tensor temporal_encoder_layer(const Tensor& f, const std::vector<std::uint8_t>& presence,
                              const TemporalParams& p, int heads);

/// embed_source -> spatial layer stack -> positional encoding ->
/// temporal layer stack.
Tensor encode(const TrackletFeatureTensor& x, const std::vector<SparseWeightedGraph>& graphs,
              const EncoderParams& p, const ModelConfig& cfg);  // [T,N,D]

// Shared initializer helpers (Glorot-style normal).
Tensor glorot(std::vector<int> shape, int fan_in, int fan_out, std::mt19937_64& rng);
FeedForwardParams make_ffn(const std::string& prefix, int dim, int hidden, ParameterStore& store,
                           std::mt19937_64& rng);
LayerNormParams make_layer_norm(const std::string& prefix, int dim, ParameterStore& store);
GraphAttentionParams make_graph_attention(const std::string& prefix, int dim,
                                          ParameterStore& store, std::mt19937_64& rng);

}  // namespace transmot
