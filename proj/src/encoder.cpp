#include "transmot/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace transmot {

void ModelConfig::validate() const {
  if (appearance_dim < 0) throw std::invalid_argument("appearance_dim must be >= 0");
  if (embed_dim < 1 || heads < 1 || window < 1 || ffn_mult < 1 || spatial_layers < 1 ||
      temporal_layers < 1) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (embed_dim % heads != 0) {
    throw std::invalid_argument("heads (" + std::to_string(heads) + ") must divide embed_dim (" +
                                std::to_string(embed_dim) + ")");
  }
}

Tensor glorot(std::vector<int> shape, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double stddev = std::sqrt(2.0 / (fan_in + fan_out));
  return Tensor::randn(std::move(shape), rng, stddev, /*requires_grad=*/true);
}

FeedForwardParams make_ffn(const std::string& prefix, int dim, int hidden, ParameterStore& store,
                           std::mt19937_64& rng) {
  FeedForwardParams p;
  p.w1 = store.add(prefix + ".w1", glorot({dim, hidden}, dim, hidden, rng));
  p.b1 = store.add(prefix + ".b1", Tensor::zeros({hidden}, true));
  p.w2 = store.add(prefix + ".w2", glorot({hidden, dim}, hidden, dim, rng));
  p.b2 = store.add(prefix + ".b2", Tensor::zeros({dim}, true));
  return p;
}

LayerNormParams make_layer_norm(const std::string& prefix, int dim, ParameterStore& store) {
  LayerNormParams p;
  p.gain = store.add(prefix + ".gain", Tensor::full({dim}, 1.0, true));
  p.bias = store.add(prefix + ".bias", Tensor::zeros({dim}, true));
  return p;
}

GraphAttentionParams make_graph_attention(const std::string& prefix, int dim,
                                          ParameterStore& store, std::mt19937_64& rng) {
  GraphAttentionParams p;
  p.wq = store.add(prefix + ".wq", glorot({dim, dim}, dim, dim, rng));
  p.wk = store.add(prefix + ".wk", glorot({dim, dim}, dim, dim, rng));
  p.cheb0 = store.add(prefix + ".cheb0", glorot({dim, dim}, dim, dim, rng));
  p.cheb1 = store.add(prefix + ".cheb1", glorot({dim, dim}, dim, dim, rng));
  p.wo = store.add(prefix + ".wo", glorot({dim, dim}, dim, dim, rng));
  p.bo = store.add(prefix + ".bo", Tensor::zeros({dim}, true));
  return p;
}

Tensor sinusoidal_encoding(int len, int dim) {
  std::vector<double> table(static_cast<std::size_t>(len) * dim, 0.0);
  for (int t = 0; t < len; ++t) {
    for (int i = 0; i < dim; i += 2) {
      const double rate = std::pow(10000.0, -static_cast<double>(i) / dim);
      table[static_cast<std::size_t>(t) * dim + i] = std::sin(t * rate);
      if (i + 1 < dim) table[static_cast<std::size_t>(t) * dim + i + 1] = std::cos(t * rate);
    }
  }
  return Tensor::from({len, dim}, std::move(table));
}

EncoderParams make_encoder_params(const ModelConfig& cfg, ParameterStore& store,
                                  std::mt19937_64& rng) {
  cfg.validate();
  const int din = cfg.input_dim();
  const int d = cfg.embed_dim;
  const int dff = cfg.ffn_mult * d;
  EncoderParams p;
  p.src_w = store.add("encoder.src_embed.w", glorot({din, d}, din, d, rng));
  p.src_b = store.add("encoder.src_embed.b", Tensor::zeros({d}, true));
  for (int layer = 0; layer < cfg.spatial_layers; ++layer) {
    const std::string prefix = "encoder.spatial" + std::to_string(layer);
    SpatialLayerParams sp;
    sp.attn = make_graph_attention(prefix, d, store, rng);
    sp.ln1 = make_layer_norm(prefix + ".ln1", d, store);
    sp.ln2 = make_layer_norm(prefix + ".ln2", d, store);
    sp.ffn = make_ffn(prefix + ".ffn", d, dff, store, rng);
    p.spatial.push_back(std::move(sp));
  }
  for (int layer = 0; layer < cfg.temporal_layers; ++layer) {
    const std::string prefix = "encoder.temporal" + std::to_string(layer);
    TemporalParams tp;
    tp.wq = store.add(prefix + ".wq", glorot({d, d}, d, d, rng));
    tp.bq = store.add(prefix + ".bq", Tensor::zeros({d}, true));
    tp.wk = store.add(prefix + ".wk", glorot({d, d}, d, d, rng));
    tp.bk = store.add(prefix + ".bk", Tensor::zeros({d}, true));
    tp.wv = store.add(prefix + ".wv", glorot({d, d}, d, d, rng));
    tp.bv = store.add(prefix + ".bv", Tensor::zeros({d}, true));
    tp.wo = store.add(prefix + ".wo", glorot({d, d}, d, d, rng));
    tp.bo = store.add(prefix + ".bo", Tensor::zeros({d}, true));
    tp.ffn = make_ffn(prefix + ".ffn", d, dff, store, rng);
    tp.ln1 = make_layer_norm(prefix + ".ln1", d, store);
    tp.ln2 = make_layer_norm(prefix + ".ln2", d, store);
    p.temporal.push_back(std::move(tp));
  }

  p.pos_encoding = sinusoidal_encoding(cfg.window, d);
  return p;
}

Tensor embed_source(const TrackletFeatureTensor& x, const EncoderParams& p) {
  const int n = x.num_tracklets();
  const int t = x.window();
  Tensor embedded = add(matmul(x.data, p.src_w), p.src_b);  // [N,T,D]
  // Re-zero absent slots so the affine bias cannot leak into them.
  std::vector<double> mask(static_cast<std::size_t>(n) * t);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = x.presence[i] ? 1.0 : 0.0;
  return mul(embedded, Tensor::from({n, t, 1}, std::move(mask)));
}

Tensor cheb_conv(const Tensor& f, const SparseWeightedGraph& g, const Tensor& theta0,
                 const Tensor& theta1) {
  if (f.size(0) != g.num_nodes) {
    throw std::invalid_argument("cheb_conv: " + std::to_string(f.size(0)) + " feature rows vs " +
                                std::to_string(g.num_nodes) + " graph nodes");
  }
  return add(matmul(f, theta0), matmul(matmul(scaled_laplacian(g), f), theta1));
}

Tensor spatial_graph_attention(const Tensor& f, const SparseWeightedGraph& g,
                               const GraphAttentionParams& p, int heads) {
  const int n = f.size(0);
  if (n != g.num_nodes) {
    throw std::invalid_argument("spatial_graph_attention: " + std::to_string(n) +
                                " feature rows vs " + std::to_string(g.num_nodes) + " graph nodes");
  }
  const int d = f.size(1);
  const int dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Tensor adj = dense_adjacency(g);  // IoU weights, unit diagonal
  const Tensor mask = adjacency_mask(g);

  const Tensor q = matmul(f, p.wq);
  const Tensor k = matmul(f, p.wk);
  const Tensor v = cheb_conv(f, g, p.cheb0, p.cheb1);

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = narrow(q, 1, h * dh, dh);
    const Tensor kh = narrow(k, 1, h * dh, dh);
    Tensor scores = scale(matmul(qh, permute(kh, {1, 0})), inv_scale);
    scores = mul(scores, adj);  // edge-weight scaling on connected pairs
    const Tensor attn = masked_softmax(scores, mask);
    head_outputs.push_back(matmul(attn, narrow(v, 1, h * dh, dh)));
  }
  return add(matmul(concat(head_outputs, 1), p.wo), p.bo);
}

Tensor graph_multi_head_attention_encoder(const Tensor& f_s,
                                          const std::vector<SparseWeightedGraph>& graphs,
                                          const GraphAttentionParams& p, int heads) {
  const int n = f_s.size(0);
  const int t = f_s.size(1);
  const int d = f_s.size(2);
  if (static_cast<int>(graphs.size()) != t) {
    throw std::invalid_argument("graph_multi_head_attention_encoder: expected one graph per frame");
  }
  for (const auto& g : graphs) {
    if (g.num_nodes != n) {
      throw std::invalid_argument("encoder graph has " + std::to_string(g.num_nodes) +
                                  " nodes, features have " + std::to_string(n));
    }
    if (g.has_virtual_sink) throw std::invalid_argument("encoder graphs must not carry a sink");
  }
  std::vector<Tensor> frames;
  frames.reserve(t);
  for (int ti = 0; ti < t; ++ti) {
    const Tensor ft = reshape(narrow(f_s, 1, ti, 1), {n, d});
    frames.push_back(reshape(spatial_graph_attention(ft, graphs[ti], p, heads), {n, 1, d}));
  }
  return concat(frames, 1);
}

Tensor spatial_encoder_layer(const Tensor& f_s, const std::vector<SparseWeightedGraph>& graphs,
                             const SpatialLayerParams& p, int heads) {
  const Tensor att = graph_multi_head_attention_encoder(f_s, graphs, p.attn, heads);
  const Tensor h = layer_norm(add(f_s, att), p.ln1.gain, p.ln1.bias);
  const Tensor ff = add(matmul(relu(add(matmul(h, p.ffn.w1), p.ffn.b1)), p.ffn.w2), p.ffn.b2);
  return layer_norm(add(h, ff), p.ln2.gain, p.ln2.bias);
}

Tensor temporal_encoder_layer(const Tensor& f, const std::vector<std::uint8_t>& presence,
                              const TemporalParams& p, int heads) {
  const int n = f.size(0);
  const int t = f.size(1);
  const int d = f.size(2);
  const int dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (static_cast<int>(presence.size()) != n * t) {
    throw std::invalid_argument("temporal_encoder_layer: presence mask size mismatch");
  }

  // Key-padding mask: queries may sit at absent steps, keys may not.
  std::vector<double> key_mask(static_cast<std::size_t>(n) * t, 0.0);
  for (int ni = 0; ni < n; ++ni) {
    int live = 0;
    for (int ti = 0; ti < t; ++ti) {
      if (presence[static_cast<std::size_t>(ni) * t + ti]) {
        key_mask[static_cast<std::size_t>(ni) * t + ti] = 1.0;
        ++live;
      }
    }
    if (live == 0) {
      throw std::invalid_argument("temporal_encoder_layer: tracklet " + std::to_string(ni) +
                                  " has no present frame");
    }
  }
  const Tensor mask = Tensor::from({n, 1, t}, std::move(key_mask));

  const Tensor q = add(matmul(f, p.wq), p.bq);
  const Tensor k = add(matmul(f, p.wk), p.bk);
  const Tensor v = add(matmul(f, p.wv), p.bv);

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = narrow(q, 2, h * dh, dh);
    const Tensor kh = narrow(k, 2, h * dh, dh);
    const Tensor vh = narrow(v, 2, h * dh, dh);
    const Tensor scores = scale(matmul(qh, permute(kh, {0, 2, 1})), inv_scale);  // [N,T,T]
    head_outputs.push_back(matmul(masked_softmax(scores, mask), vh));
  }
  const Tensor ctx = add(matmul(concat(head_outputs, 2), p.wo), p.bo);

  const Tensor h1 = layer_norm(add(f, ctx), p.ln1.gain, p.ln1.bias);
  const Tensor ff = add(matmul(relu(add(matmul(h1, p.ffn.w1), p.ffn.b1)), p.ffn.w2), p.ffn.b2);
  const Tensor h2 = layer_norm(add(h1, ff), p.ln2.gain, p.ln2.bias);
  return permute(h2, {1, 0, 2});
}

Tensor encode(const TrackletFeatureTensor& x, const std::vector<SparseWeightedGraph>& graphs,
              const EncoderParams& p, const ModelConfig& cfg) {
  const int t = x.window();
  const int d = cfg.embed_dim;
  Tensor h = embed_source(x, p);
  for (const auto& layer : p.spatial) h = spatial_encoder_layer(h, graphs, layer, cfg.heads);
  h = add(h, reshape(p.pos_encoding, {1, t, d}));
  Tensor out;
  for (std::size_t i = 0; i < p.temporal.size(); ++i) {
    out = temporal_encoder_layer(h, x.presence, p.temporal[i], cfg.heads);
    if (i + 1 < p.temporal.size()) h = permute(out, {1, 0, 2});
  }
  return out;
}

}  // namespace transmot
