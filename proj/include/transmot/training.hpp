#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "transmot/model.hpp"
#include "transmot/mot_io.hpp"

namespace transmot {

/// One box of a training frame; id -1 marks a spurious detection with no
/// ground-truth identity. from_detection records whether the box came
/// from the detector (replaced or spurious) rather than raw ground truth.
struct LabeledBox {
  int id = -1;
  BoundingBox box;
  std::vector<double> appearance;
  bool from_detection = false;
};
using LabeledFrame = std::vector<LabeledBox>;

/// A window of T history frames plus one candidate frame, with the
/// assignment targets the decoder must reproduce.
struct TrainingSample {
  std::vector<LabeledFrame> frames;             // T+1 frames, last one = candidates
  std::vector<int> tracklet_ids;                // original ids; index = remapped tracklet index
  std::vector<int> target_row_labels;           // per candidate: 0..N-1 tracklet, N = source
  std::vector<std::uint8_t> sink_row_labels;    // per tracklet: 1 when unmatched this frame
  double img_w = 0;
  double img_h = 0;

  int num_tracklets() const { return static_cast<int>(tracklet_ids.size()); }
  int num_candidates() const { return static_cast<int>(frames.back().size()); }
  int window() const { return static_cast<int>(frames.size()) - 1; }
};

/// Replaces each ground-truth box with its best-IoU detection (greedy,
/// IoU > 0.5, one detection per box); unmatched detections are appended
/// with id -1. Ground-truth boxes with no matching detection are kept.
LabeledFrame inject_detector_noise(const LabeledFrame& gt_frame,
                                   const std::vector<Detection>& detections);

/// Builds the sample starting at `start_frame` (1-based; may reach back
/// before the sequence, leaving early slots empty) from a sequence with
/// ground truth; `window` history frames plus one candidate frame.
/// With detector_noise on, only detection-backed boxes enter the sample,
/// so histories carry the same holes the tracker would see at missed
/// frames and every candidate is an actual detection.
TrainingSample make_training_sample(const SequenceBundle& seq, int start_frame, int window,
                                    bool detector_noise);

/// Every valid window position of a sequence.
std::vector<TrainingSample> samples_from_sequence(const SequenceBundle& seq, int window,
                                                  bool detector_noise);

/// Random sample with controlled sizes: the first min(M,N) candidates
/// continue tracklets 0..; extras are labeled virtual-source.
TrainingSample random_training_sample(int num_candidates, int num_tracklets, int window,
                                      int appearance_dim, std::uint64_t seed);

EncoderInputs sample_encoder_inputs(const TrainingSample& sample, const ModelConfig& cfg);
DecoderInputs sample_decoder_inputs(const TrainingSample& sample, const ModelConfig& cfg);

struct LossBreakdown {
  double ce = 0;      // candidate-row cross-entropy
  double sink = 0;    // multi-label soft-margin term (binary CE on sigmoids)
  double total = 0;   // ce + lambda * sink
  double lambda = 0;
};

struct LossResult {
  Tensor total;  // scalar, differentiable
  LossBreakdown breakdown;
};

/// Candidate rows: softmax cross-entropy against target_row_labels.
/// Sink row: per-tracklet binary cross-entropy on the raw logits (the
/// source column is excluded).
LossResult assignment_loss(const ExtendedAssignmentMatrix& a, const std::vector<int>& labels,
                           const std::vector<std::uint8_t>& sink_labels, double lambda);

struct TrainStepRecord {
  int step = 0;
  double ce = 0;
  double sink = 0;
  double total = 0;
};

struct TrainOptions {
  double lr = 0.0015;
  double lambda_weight = 1.0;
  int epochs = 1;
  int max_steps = 0;  // 0 = no cap
  bool shuffle = true;
  std::uint64_t seed = 1;
  int lr_decay_every = 0;        // steps; 0 disables the optional decay
  double lr_decay_factor = 1.0;
};

/// SGD loop over the samples; throws on a non-finite loss. Deterministic
/// for a fixed seed.
std::vector<TrainStepRecord> train(TransMOTModel& model, const std::vector<TrainingSample>& dataset,
                                   const TrainOptions& opt);

void write_loss_csv(const std::vector<TrainStepRecord>& records, const std::string& path);

// ---- Gradient checking -----------------------------------------------------

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool all_pass = false;
};

/// Central finite differences (forward evaluations only) against the
/// analytic gradients of the full encoder+decoder+loss pipeline. Checks
/// `samples_per_tensor` randomly chosen entries of every parameter
/// tensor; relative error |analytic - fd| / max(1, |analytic|).
/// `corrupt` injects an error into one gradient as a negative control.
GradCheckReport gradcheck_model(TransMOTModel& model, const TrainingSample& sample,
                                int samples_per_tensor, double step, double tolerance,
                                std::uint64_t seed, bool corrupt = false);

}  // namespace transmot
