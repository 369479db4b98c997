#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "transmot/config.hpp"
#include "transmot/mot_io.hpp"

namespace transmot {

/// Target invisible (no gt, no detection) for frames [start, end], 1-based
/// inclusive, target 0-based.
struct OcclusionEvent {
  int target = 0;
  int start = 1;
  int end = 1;
};

/// Seed-deterministic multi-target scenario: constant-velocity targets
/// bouncing inside the image, detections as jittered true boxes with
/// false-negative and clutter draws, identity-clustered appearance
/// vectors.
struct ScenarioConfig {
  std::string name = "synth";
  int num_targets = 6;
  int frame_count = 50;
  double img_w = 640;
  double img_h = 480;

  double min_size = 30;
  double max_size = 60;
  double max_speed = 3.0;             // pixels/frame per axis
  double direction_change_prob = 0.0; // per frame, resamples the velocity

  double box_jitter_std = 0.0;        // detection box noise, pixels
  double false_negative_rate = 0.0;
  double false_positive_rate = 0.0;   // per target slot per frame
  double confidence_mean = 0.9;
  double confidence_std = 0.03;

  int appearance_dim = 8;
  double appearance_scale = 2.0;      // norm of each identity's mean vector
  double appearance_noise_std = 0.05;

  std::vector<OcclusionEvent> occlusions;
  int random_occlusions = 0;          // extra events drawn from the seed
  int occlusion_min_len = 3;
  int occlusion_max_len = 8;

  std::uint64_t seed = 1;

  static ScenarioConfig from_config(const KeyValueConfig& kv);
};

SequenceBundle synth_generate(const ScenarioConfig& cfg);

}  // namespace transmot
