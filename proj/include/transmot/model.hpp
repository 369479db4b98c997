#pragma once

#include <string>
#include <vector>

#include "transmot/decoder.hpp"
#include "transmot/encoder.hpp"

namespace transmot {

/// One tracklet's state over the attention window; slot 0 is the oldest
/// frame, slot T-1 the current one. Absent slots stay default.
struct TrackletWindow {
  struct Slot {
    bool present = false;
    BoundingBox box;
    std::vector<double> appearance;
  };
  std::vector<Slot> slots;

  explicit TrackletWindow(int window = 0) : slots(window) {}
};

struct EncoderInputs {
  TrackletFeatureTensor features;
  std::vector<SparseWeightedGraph> graphs;  // one per frame in the window
};

struct DecoderInputs {
  SparseWeightedGraph graph;  // M+1 nodes, sink last
  Tensor features;            // [M, D_in]
};

/// Node feature vector: appearance (length F, zero-padded/truncated)
/// concatenated with the normalized box.
std::vector<double> node_features(const BoundingBox& box, const std::vector<double>& appearance,
                                  double img_w, double img_h, int appearance_dim);

EncoderInputs build_encoder_inputs(const std::vector<TrackletWindow>& windows, double img_w,
                                   double img_h, const ModelConfig& cfg);

DecoderInputs build_decoder_inputs(const std::vector<Detection>& detections, double img_w,
                                   double img_h, const ModelConfig& cfg);

/// Encoder + decoder bundle with its parameter registry.
class TransMOTModel {
 public:
  TransMOTModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const EncoderParams& encoder_params() const { return enc_; }
  const DecoderParams& decoder_params() const { return dec_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  std::vector<Tensor> parameters() const { return store_.tensors(); }

  Tensor encode(const TrackletFeatureTensor& x, const std::vector<SparseWeightedGraph>& graphs) const {
    return transmot::encode(x, graphs, enc_, cfg_);
  }
  ExtendedAssignmentMatrix decode(const SparseWeightedGraph& cand_graph, const Tensor& cand_features,
                                  const Tensor& enc_out) const {
    return transmot::decode(cand_graph, cand_features, enc_out, dec_, cfg_);
  }
  ExtendedAssignmentMatrix forward(const EncoderInputs& enc_in, const DecoderInputs& dec_in) const;

  void save(const std::string& path) const;
  static TransMOTModel load(const std::string& path);

 private:
  ModelConfig cfg_;
  ParameterStore store_;
  EncoderParams enc_;
  DecoderParams dec_;
};

}  // namespace transmot
