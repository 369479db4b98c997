#include "transmot/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace transmot {

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.u, b.u);
  if (iw <= 0) return 0.0;
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.v, b.v);
  if (ih <= 0) return 0.0;
  return iw * ih;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

NormalizedBox normalize_box(const BoundingBox& b, double img_w, double img_h) {
  if (img_w <= 0 || img_h <= 0) throw std::invalid_argument("normalize_box: image size must be positive");
  return {b.u / img_w, b.v / img_h, b.w / img_w, b.h / img_h};
}

}  // namespace transmot
