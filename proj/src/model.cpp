#include "transmot/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace transmot {

std::vector<double> node_features(const BoundingBox& box, const std::vector<double>& appearance,
                                  double img_w, double img_h, int appearance_dim) {
  std::vector<double> f(static_cast<std::size_t>(appearance_dim) + 4, 0.0);
  const std::size_t k = std::min<std::size_t>(appearance.size(), appearance_dim);
  std::copy_n(appearance.begin(), k, f.begin());
  const NormalizedBox nb = normalize_box(box, img_w, img_h);
  f[appearance_dim + 0] = nb.u;
  f[appearance_dim + 1] = nb.v;
  f[appearance_dim + 2] = nb.w;
  f[appearance_dim + 3] = nb.h;
  return f;
}

EncoderInputs build_encoder_inputs(const std::vector<TrackletWindow>& windows, double img_w,
                                   double img_h, const ModelConfig& cfg) {
  const int n = static_cast<int>(windows.size());
  const int t = cfg.window;
  const int din = cfg.input_dim();
  if (n < 1) throw std::invalid_argument("build_encoder_inputs: no tracklets");

  std::vector<double> data(static_cast<std::size_t>(n) * t * din, 0.0);
  std::vector<std::uint8_t> presence(static_cast<std::size_t>(n) * t, 0);
  for (int ni = 0; ni < n; ++ni) {
    if (static_cast<int>(windows[ni].slots.size()) != t) {
      throw std::invalid_argument("build_encoder_inputs: window length mismatch");
    }
    for (int ti = 0; ti < t; ++ti) {
      const auto& slot = windows[ni].slots[ti];
      if (!slot.present) continue;
      presence[static_cast<std::size_t>(ni) * t + ti] = 1;
      const auto f = node_features(slot.box, slot.appearance, img_w, img_h, cfg.appearance_dim);
      std::copy(f.begin(), f.end(),
                data.begin() + (static_cast<std::size_t>(ni) * t + ti) * din);
    }
  }

  EncoderInputs out;
  out.features.data = Tensor::from({n, t, din}, std::move(data));
  out.features.presence = std::move(presence);
  out.graphs.reserve(t);
  for (int ti = 0; ti < t; ++ti) {
    std::vector<std::pair<int, BoundingBox>> boxes;
    for (int ni = 0; ni < n; ++ni) {
      if (windows[ni].slots[ti].present) boxes.emplace_back(ni, windows[ni].slots[ti].box);
    }
    out.graphs.push_back(build_tracklet_graph(n, boxes));
  }
  return out;
}

DecoderInputs build_decoder_inputs(const std::vector<Detection>& detections, double img_w,
                                   double img_h, const ModelConfig& cfg) {
  const int m = static_cast<int>(detections.size());
  const int din = cfg.input_dim();
  if (m < 1) throw std::invalid_argument("build_decoder_inputs: no detections");

  std::vector<double> data(static_cast<std::size_t>(m) * din, 0.0);
  for (int mi = 0; mi < m; ++mi) {
    const auto f =
        node_features(detections[mi].bbox, detections[mi].appearance, img_w, img_h, cfg.appearance_dim);
    std::copy(f.begin(), f.end(), data.begin() + static_cast<std::size_t>(mi) * din);
  }

  DecoderInputs out;
  out.graph = build_candidate_graph(detections);
  out.features = Tensor::from({m, din}, std::move(data));
  return out;
}

TransMOTModel::TransMOTModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  enc_ = make_encoder_params(cfg_, store_, rng);
  dec_ = make_decoder_params(cfg_, store_, rng);
}

ExtendedAssignmentMatrix TransMOTModel::forward(const EncoderInputs& enc_in,
                                                const DecoderInputs& dec_in) const {
  return decode(dec_in.graph, dec_in.features, encode(enc_in.features, enc_in.graphs));
}

void TransMOTModel::save(const std::string& path) const {
  std::map<std::string, std::string> meta;
  meta["appearance_dim"] = std::to_string(cfg_.appearance_dim);
  meta["embed_dim"] = std::to_string(cfg_.embed_dim);
  meta["heads"] = std::to_string(cfg_.heads);
  meta["window"] = std::to_string(cfg_.window);
  meta["ffn_mult"] = std::to_string(cfg_.ffn_mult);
  meta["spatial_layers"] = std::to_string(cfg_.spatial_layers);
  meta["temporal_layers"] = std::to_string(cfg_.temporal_layers);
  checkpoint_from_store(store_, std::move(meta)).save(path);
}

TransMOTModel TransMOTModel::load(const std::string& path) {
  const Checkpoint ckpt = Checkpoint::load(path);
  const auto need = [&](const std::string& key) {
    const auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) throw std::runtime_error("checkpoint missing meta key: " + key);
    return std::stoi(it->second);
  };
  const auto optional = [&](const std::string& key, int fallback) {
    const auto it = ckpt.meta.find(key);
    return it == ckpt.meta.end() ? fallback : std::stoi(it->second);
  };
  ModelConfig cfg;
  cfg.appearance_dim = need("appearance_dim");
  cfg.embed_dim = need("embed_dim");
  cfg.heads = need("heads");
  cfg.window = need("window");
  cfg.ffn_mult = need("ffn_mult");
  cfg.spatial_layers = optional("spatial_layers", 1);
  cfg.temporal_layers = optional("temporal_layers", 1);
  TransMOTModel model(cfg, /*seed=*/0);
  restore_into_store(ckpt, model.store_);
  return model;
}

}  // namespace transmot
