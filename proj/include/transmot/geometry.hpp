#pragma once

#include <vector>

namespace transmot {

/// Axis-aligned image-plane box, top-left corner plus size, in pixels.
struct BoundingBox {
  double u = 0;  // left
  double v = 0;  // top
  double w = 1;  // width
  double h = 1;  // height

  double area() const { return w * h; }
  double cx() const { return u + w / 2.0; }
  double cy() const { return v + h / 2.0; }
  double right() const { return u + w; }
  double bottom() const { return v + h; }
};

/// Detector proposal: box, confidence, appearance vector, frame position.
struct Detection {
  BoundingBox bbox;
  double confidence = 1.0;
  std::vector<double> appearance;
  int frame = 0;
  int source_index = 0;  // position in the frame's detection list
};

/// Box coordinates divided componentwise by the image size.
struct NormalizedBox {
  double u = 0, v = 0, w = 0, h = 0;
};

/// Intersection area of two boxes (zero when disjoint or merely touching).
double intersection_area(const BoundingBox& a, const BoundingBox& b);

/// Intersection over union, in [0,1].
double iou(const BoundingBox& a, const BoundingBox& b);

NormalizedBox normalize_box(const BoundingBox& b, double img_w, double img_h);

}  // namespace transmot
