#pragma once

#include <array>

#include "transmot/geometry.hpp"

namespace transmot {

/// Constant-velocity box filter state: mean (cx, cy, w, h, vcx, vcy, vw,
/// vh) in pixels and pixels/frame, with an 8x8 covariance.
struct KalmanState {
  std::array<double, 8> mean{};
  std::array<double, 64> covariance{};  // row-major 8x8, symmetric PSD

  BoundingBox box() const {
    const double w = mean[2], h = mean[3];
    return {mean[0] - w / 2.0, mean[1] - h / 2.0, w, h};
  }
};

/// Noise scales, relative to box height (common pedestrian-tracking
/// defaults; the measurement/process magnitudes track object size).
struct KalmanNoise {
  double position_std_factor = 1.0 / 20.0;  // process + measurement position noise
  double velocity_std_factor = 1.0 / 160.0;
};

KalmanState kalman_init(const BoundingBox& box, const KalmanNoise& noise = {});

/// Constant-velocity prediction; covariance grows by the process noise.
KalmanState kalman_predict(const KalmanState& s, const KalmanNoise& noise = {});

/// Measurement update on (cx, cy, w, h). Degenerate innovation covariance
/// is re-conditioned with a 1e-9 diagonal jitter before the solve; width
/// and height are clamped to stay positive.
KalmanState kalman_update(const KalmanState& s, const BoundingBox& z,
                          const KalmanNoise& noise = {});

}  // namespace transmot
