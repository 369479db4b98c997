#include "transmot/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "transmot/assignment.hpp"

namespace transmot {

DecoderParams make_decoder_params(const ModelConfig& cfg, ParameterStore& store,
                                  std::mt19937_64& rng) {
  cfg.validate();
  const int din = cfg.input_dim();
  const int d = cfg.embed_dim;
  const int dff = cfg.ffn_mult * d;
  DecoderParams p;
  p.tgt_w = store.add("decoder.tgt_embed.w", glorot({din, d}, din, d, rng));
  p.tgt_b = store.add("decoder.tgt_embed.b", Tensor::zeros({d}, true));
  p.sink_table = store.add("decoder.sink_embed", Tensor::randn({1, d}, rng, 0.5, true));
  p.source_table = store.add("decoder.source_embed", Tensor::randn({1, d}, rng, 0.5, true));
  p.self_attn = make_graph_attention("decoder.self", d, store, rng);
  p.self_ln = make_layer_norm("decoder.self.ln", d, store);
  p.cross.wq = store.add("decoder.cross.wq", glorot({d, d}, d, d, rng));
  p.cross.bq = store.add("decoder.cross.bq", Tensor::zeros({d}, true));
  p.cross.wk = store.add("decoder.cross.wk", glorot({d, d}, d, d, rng));
  p.cross.bk = store.add("decoder.cross.bk", Tensor::zeros({d}, true));
  p.cross.wv = store.add("decoder.cross.wv", glorot({d, d}, d, d, rng));
  p.cross.bv = store.add("decoder.cross.bv", Tensor::zeros({d}, true));
  p.cross.wo = store.add("decoder.cross.wo", glorot({d, d}, d, d, rng));
  p.cross.bo = store.add("decoder.cross.bo", Tensor::zeros({d}, true));
  p.cross_ln = make_layer_norm("decoder.cross.ln", d, store);
  p.ffn = make_ffn("decoder.ffn", d, dff, store, rng);
  p.ffn_ln = make_layer_norm("decoder.ffn.ln", d, store);
  p.head_w = store.add("decoder.head.w", glorot({d, 1}, d, 1, rng));
  p.head_b = store.add("decoder.head.b", Tensor::zeros({1}, true));
  return p;
}

ExtendedAssignmentMatrix decode(const SparseWeightedGraph& cand_graph, const Tensor& cand_features,
                                const Tensor& enc_out, const DecoderParams& p,
                                const ModelConfig& cfg) {
  const int m = cand_features.size(0);
  const int t = enc_out.size(0);
  const int n = enc_out.size(1);
  const int d = cfg.embed_dim;
  const int heads = cfg.heads;
  const int dh = cfg.head_dim();
  if (m < 1 || n < 1) {
    throw std::invalid_argument("decode: needs at least one candidate and one tracklet");
  }
  if (cand_graph.num_nodes != m + 1 || !cand_graph.has_virtual_sink) {
    throw std::invalid_argument("decode: candidate graph must have M+1 nodes with a trailing sink");
  }
  if (enc_out.size(2) != d || cand_features.size(1) != cfg.input_dim()) {
    throw std::invalid_argument("decode: feature dimensions do not match the model config");
  }

  // Embedded candidates with the sink appended: F_tgt [M+1, D].
  const Tensor embedded = add(matmul(cand_features, p.tgt_w), p.tgt_b);
  const Tensor f_tgt = concat({embedded, embedding_rows(p.sink_table, {0})}, 0);

  // Graph self-attention over the candidate graph (sink participates via
  // its 0.5-weight edges).
  const Tensor self_att = spatial_graph_attention(f_tgt, cand_graph, p.self_attn, heads);
  const Tensor f_att = layer_norm(add(f_tgt, self_att), p.self_ln.gain, p.self_ln.bias);

  // Encoder output extended with the virtual source, replicated across T:
  // [T, N+1, D] -> keys/values arranged per tracklet column.
  std::vector<Tensor> source_steps(t, embedding_rows(p.source_table, {0}));
  const Tensor source_col = reshape(concat(source_steps, 0), {t, 1, d});
  const Tensor enc_ext = concat({enc_out, source_col}, 1);  // [T, N+1, D]
  const Tensor kv_base = permute(enc_ext, {1, 0, 2});       // [N+1, T, D]

  const Tensor q = add(matmul(f_att, p.cross.wq), p.cross.bq);   // [M+1, D]
  const Tensor k = add(matmul(kv_base, p.cross.wk), p.cross.bk); // [N+1, T, D]
  const Tensor v = add(matmul(kv_base, p.cross.wv), p.cross.bv);

  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = reshape(narrow(q, 1, h * dh, dh), {1, m + 1, dh});
    const Tensor kh = narrow(k, 2, h * dh, dh);  // [N+1, T, dh]
    const Tensor vh = narrow(v, 2, h * dh, dh);
    // scores[n, m, t]: query of pair (m, n) against tracklet n's T steps.
    const Tensor scores = scale(matmul(qh, permute(kh, {0, 2, 1})), inv_scale);
    const Tensor attn = softmax(scores);              // over the T keys
    head_outputs.push_back(matmul(attn, vh));         // [N+1, M+1, dh]
  }
  const Tensor ctx = add(matmul(concat(head_outputs, 2), p.cross.wo), p.cross.bo);
  const Tensor pair_ctx = permute(ctx, {1, 0, 2});  // [M+1, N+1, D]

  // Residual against the candidate features duplicated across the
  // tracklet axis, then feed-forward with its own norm.
  const Tensor dup = reshape(f_att, {m + 1, 1, d});
  const Tensor h1 = layer_norm(add(dup, pair_ctx), p.cross_ln.gain, p.cross_ln.bias);
  const Tensor ff = add(matmul(relu(add(matmul(h1, p.ffn.w1), p.ffn.b1)), p.ffn.w2), p.ffn.b2);
  const Tensor h2 = layer_norm(add(h1, ff), p.ffn_ln.gain, p.ffn_ln.bias);

  ExtendedAssignmentMatrix out;
  out.logits = reshape(add(matmul(h2, p.head_w), p.head_b), {m + 1, n + 1});
  out.num_candidates = m;
  out.num_tracklets = n;
  return out;
}

AssignmentProbs ExtendedAssignmentMatrix::probs() const {
  AssignmentProbs p;
  p.rows = num_candidates + 1;
  p.cols = num_tracklets + 1;
  p.data.resize(static_cast<std::size_t>(p.rows) * p.cols);
  const auto& lv = logits.values();
  for (int r = 0; r < num_candidates; ++r) {
    const double* row = lv.data() + static_cast<std::size_t>(r) * p.cols;
    double hi = row[0];
    for (int c = 1; c < p.cols; ++c) hi = std::max(hi, row[c]);
    double denom = 0.0;
    for (int c = 0; c < p.cols; ++c) denom += std::exp(row[c] - hi);
    for (int c = 0; c < p.cols; ++c) {
      p.data[static_cast<std::size_t>(r) * p.cols + c] = std::exp(row[c] - hi) / denom;
    }
  }
  const double* sink = lv.data() + static_cast<std::size_t>(num_candidates) * p.cols;
  for (int c = 0; c < p.cols; ++c) {
    p.data[static_cast<std::size_t>(num_candidates) * p.cols + c] = 1.0 / (1.0 + std::exp(-sink[c]));
  }
  return p;
}

HardAssignment hard_assign(const AssignmentProbs& probs, double threshold) {
  const int m = probs.num_candidates();
  const int n = probs.num_tracklets();
  HardAssignment out;

  std::vector<char> cand_used(m, 0), track_used(n, 0);
  if (m > 0 && n > 0) {
    CostMatrix scores(m, n);
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < n; ++c) scores.at(r, c) = probs.at(r, c);
    }
    for (const auto& [r, c] : hungarian(scores, /*maximize=*/true).pairs) {
      if (probs.at(r, c) > threshold) {
        out.pairs.emplace_back(r, c);
        cand_used[r] = 1;
        track_used[c] = 1;
      }
    }
  }
  for (int r = 0; r < m; ++r) {
    if (!cand_used[r]) out.unmatched_candidates.push_back(r);
  }
  for (int c = 0; c < n; ++c) {
    if (!track_used[c]) out.unmatched_tracklets.push_back(c);
  }
  return out;
}

}  // namespace transmot
