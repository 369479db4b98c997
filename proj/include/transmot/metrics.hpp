#pragma once

#include <string>
#include <vector>

#include "transmot/mot_io.hpp"

namespace transmot {

struct ClearMotResult {
  int fp = 0;
  int fn = 0;
  int ids = 0;
  int matches = 0;        // true-positive box matches
  double mota = 1.0;
  double motp = 0.0;      // mean IoU over matches
  double mt_percent = 0;  // trajectories covered >= 80%
  double ml_percent = 0;  // trajectories covered <= 20%
  int total_gt_boxes = 0;
  int gt_trajectories = 0;
};

struct IdMetricsResult {
  int idtp = 0;
  int idfp = 0;
  int idfn = 0;
  double idp = 0;
  double idr = 0;
  double idf1 = 0;
};

struct MetricsReport {
  ClearMotResult clear;
  IdMetricsResult id;
  int total_pred_boxes = 0;
  int pred_trajectories = 0;

  std::string table() const;
  std::string csv() const;
};

/// CLEAR MOT protocol: per-frame matching that first continues the
/// previous frame's correspondences, then runs Hungarian on IoU >=
/// threshold for the rest; an identity switch is counted whenever a gt
/// identity's matched track id changes.
ClearMotResult clear_mot(const std::vector<std::vector<GtEntry>>& gt,
                         const std::vector<TrackEntry>& pred, double iou_threshold = 0.5);

/// Trajectory-level ID scores from the globally optimal gt/pred
/// trajectory pairing (pair value = co-located frames under the IoU
/// threshold).
IdMetricsResult id_metrics(const std::vector<std::vector<GtEntry>>& gt,
                           const std::vector<TrackEntry>& pred, double iou_threshold = 0.5);

MetricsReport evaluate(const std::vector<std::vector<GtEntry>>& gt,
                       const std::vector<TrackEntry>& pred, double iou_threshold = 0.5);

}  // namespace transmot
