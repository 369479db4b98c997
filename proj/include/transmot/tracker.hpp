#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "transmot/config.hpp"
#include "transmot/decoder.hpp"
#include "transmot/kalman.hpp"
#include "transmot/model.hpp"
#include "transmot/mot_io.hpp"

namespace transmot {

struct TrackerConfig {
  int window = 5;              // T, tracklet history length
  double tau_match = 0.75;     // stage-1 IoU gate on Kalman predictions
  int k_robust = 15;           // consecutive matches before the motion gate applies
  int k_purge = 50;            // frames unmatched before a tracklet dies
  double tau_det = 0.3;        // low-confidence detection filter
  double tau_assign = 0.5;     // stage-2 assignment score threshold
  double tau_ltoh = 1.0;       // stage-3 cost ceiling
  double tau_dup = 0.9;        // duplicate overlap threshold
  double lambda_weight = 1.0;  // loss weighting (training)
  double img_w = 1920;
  double img_h = 1080;
  std::string checkpoint_path;
  KalmanNoise kalman_noise;

  static TrackerConfig from_config(const KeyValueConfig& kv);
};

/// Identity-bearing track state: short history for the transformer
/// window, Kalman state for the motion gate, and the last visible
/// snapshot for long-term re-association.
struct Tracklet {
  enum class Status { Active, Occluded, Dead };

  struct HistoryEntry {
    int frame = 0;
    BoundingBox box;
    std::vector<double> appearance;
  };

  int id = 0;
  Status status = Status::Active;
  std::deque<HistoryEntry> history;  // ascending frames, at most `window` kept
  int consecutive_matches = 0;
  HistoryEntry last_visible;
  KalmanState kalman;
  int last_update_frame = 0;
};

/// Normalized top distance between an occluded tracklet's box i and a
/// candidate box j: ||(cx_i - cx_j, v_i - v_j)|| / h_i.
double d_top(const BoundingBox& occluded_box, const BoundingBox& cand_box);

/// Indices of unassociated detections that survive duplicate handling:
/// a detection is deleted when max intersection with an associated box
/// divided by its own area reaches tau_dup.
std::vector<int> duplicate_removal(const std::vector<BoundingBox>& associated_boxes,
                                   const std::vector<Detection>& unassociated, double tau_dup);

/// Everything the second stage needs to score tracklet/candidate pairs.
struct Stage2Request {
  std::vector<TrackletWindow> windows;        // aligned with `tracklets`
  std::vector<const Tracklet*> tracklets;
  std::vector<Detection> detections;
  int frame = 0;
  double img_w = 0;
  double img_h = 0;
};

/// Produces the (M+1)x(N+1) probability matrix for stage 2. The product
/// scorer wraps a TransMOT model; tests may inject oracles.
using Stage2Scorer = std::function<AssignmentProbs(const Stage2Request&)>;

Stage2Scorer make_model_scorer(std::shared_ptr<TransMOTModel> model);

/// Three-stage cascade tracker. One instance per sequence; frames must be
/// processed in ascending order.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg, Stage2Scorer scorer = nullptr);

  /// Runs the cascade for one frame and returns the emitted (id, box)
  /// rows for every active tracklet.
  std::vector<TrackEntry> process_frame(int frame, const std::vector<Detection>& detections);

  const std::vector<Tracklet>& tracklets() const { return tracklets_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  TrackerConfig cfg_;
  Stage2Scorer scorer_;
  std::vector<Tracklet> tracklets_;
  int next_id_ = 1;
  int last_frame_ = 0;
};

/// Runs a whole sequence through a fresh tracker.
std::vector<TrackEntry> track_sequence(const SequenceBundle& seq, const TrackerConfig& cfg,
                                       const Stage2Scorer& scorer);

}  // namespace transmot
