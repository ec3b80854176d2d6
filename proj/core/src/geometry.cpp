#include "aerodet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace aerodet {

bool BBox::valid() const noexcept {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 &&
         h > 0.0;
}

double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::min(1.0, inter / uni) : 0.0;
}

double coverage(const BBox& inner, const BBox& region) noexcept {
  const double area = inner.area();
  if (area <= 0.0) return 0.0;
  return std::min(1.0, intersection_area(inner, region) / area);
}

std::optional<BBox> intersect(const BBox& a, const BBox& b) noexcept {
  const double x1 = std::max(a.x, b.x);
  const double y1 = std::max(a.y, b.y);
  const double x2 = std::min(a.right(), b.right());
  const double y2 = std::min(a.bottom(), b.bottom());
  if (x2 <= x1 || y2 <= y1) return std::nullopt;
  // Keep the original extent on an axis where one box lies inside the other,
  // so that containment leaves coordinates bit-exact.
  auto extent = [](double lo, double hi, const BBox& p, const BBox& q, bool horizontal) {
    const double p_lo = horizontal ? p.x : p.y, p_ext = horizontal ? p.w : p.h;
    const double q_lo = horizontal ? q.x : q.y, q_ext = horizontal ? q.w : q.h;
    const double p_hi = horizontal ? p.right() : p.bottom(), q_hi = horizontal ? q.right() : q.bottom();
    if (lo == p_lo && hi == p_hi) return p_ext;
    if (lo == q_lo && hi == q_hi) return q_ext;
    return hi - lo;
  };
  return BBox{x1, y1, extent(x1, x2, a, b, true), extent(y1, y2, a, b, false)};
}

BBox union_box(const BBox& a, const BBox& b) noexcept {
  return BBox::from_corners(std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.right(), b.right()),
                            std::max(a.bottom(), b.bottom()));
}

bool contains(const BBox& region, const BBox& inner, double tol) noexcept {
  return inner.x >= region.x - tol && inner.y >= region.y - tol &&
         inner.right() <= region.right() + tol && inner.bottom() <= region.bottom() + tol;
}

BBox image_box(const ImageDims& dims) noexcept { return {0.0, 0.0, dims.width, dims.height}; }

std::optional<BBox> clamp_to_image(const BBox& b, const ImageDims& dims) noexcept {
  return intersect(b, image_box(dims));
}

namespace {

// Returns (start, extent) of a window of `extent` on [0, limit] centered near `c`.
std::pair<double, double> place_axis(double c, double extent, double limit) noexcept {
  if (extent >= limit) return {0.0, limit};
  const double half = 0.5 * extent;
  const double clamped = std::clamp(c, half, limit - half);
  return {clamped - half, extent};
}

}  // namespace

BBox recenter(Point2 seed_center, double w_b, double h_b, const ImageDims& dims) noexcept {
  const auto [x, w] = place_axis(seed_center.x, w_b, dims.width);
  const auto [y, h] = place_axis(seed_center.y, h_b, dims.height);
  return {x, y, w, h};
}

}  // namespace aerodet
