#pragma once

#include <optional>
#include <string>
#include <vector>

#include "transmot/geometry.hpp"

namespace transmot {

/// One ground-truth box: identity plus visibility metadata.
struct GtEntry {
  int frame = 0;
  int id = 0;
  BoundingBox box;
  double visibility = 1.0;
  std::vector<double> appearance;  // filled from a sidecar when available
};

/// One emitted track box, MOT result convention.
struct TrackEntry {
  int frame = 0;
  int id = 0;
  BoundingBox box;
  double confidence = 1.0;
};

/// In-memory MOTChallenge-style sequence: detections per frame plus
/// optional ground truth. Frames are 1-based and contiguous.
struct SequenceBundle {
  std::string name;
  double img_w = 0;
  double img_h = 0;
  int frame_count = 0;
  std::vector<std::vector<Detection>> detections;  // index 0 == frame 1
  std::vector<std::vector<GtEntry>> ground_truth;  // may be empty

  const std::vector<Detection>& frame_detections(int frame) const {
    return detections[frame - 1];
  }
};

/// Filters applied to gt files carrying class/visibility columns.
struct GtFilter {
  int pedestrian_class = 1;
  double min_visibility = 0.1;
};

/// MOT det.txt: "frame,id,left,top,width,height,conf,...", id == -1.
std::vector<std::vector<Detection>> parse_mot_detections(const std::string& path);

/// MOT gt.txt: "frame,id,left,top,width,height,active,class,visibility".
/// Rows failing the filter (inactive, non-pedestrian, low visibility) are
/// dropped. Files with only 7 columns are accepted; missing columns pass.
std::vector<std::vector<GtEntry>> parse_mot_gt(const std::string& path, const GtFilter& filter = {});

/// Result rows sorted by frame then id, conf 1:
/// "frame,id,left,top,width,height,1,-1,-1,-1".
void write_results(const std::vector<TrackEntry>& tracks, const std::string& path);
std::vector<TrackEntry> parse_results(const std::string& path);

/// Appearance sidecar: "frame,det_index,f1,...,fF". Returns the number of
/// detections left without a row (they get zero vectors).
int attach_features(const std::string& path, int expected_dim,
                    std::vector<std::vector<Detection>>& detections);
int attach_gt_features(const std::string& path, int expected_dim,
                       std::vector<std::vector<GtEntry>>& gt);

/// Sequence directory layout:
///   <dir>/seqinfo.ini            (name, imWidth, imHeight, seqLength)
///   <dir>/det/det.txt            detections
///   <dir>/det/features.txt       appearance sidecar (optional)
///   <dir>/gt/gt.txt              ground truth (optional)
///   <dir>/gt/features.txt        gt appearance sidecar (optional)
SequenceBundle load_sequence(const std::string& dir, int appearance_dim,
                             const GtFilter& filter = {});
void write_sequence(const SequenceBundle& bundle, const std::string& dir);

}  // namespace transmot
