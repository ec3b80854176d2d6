#pragma once

#include <optional>

namespace aerodet {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Image extent in pixels.
struct ImageDims {
  double width = 0.0;
  double height = 0.0;

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

/// Axis-aligned box stored as (left, top, width, height) in image pixels.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }
  double area() const noexcept { return w * h; }
  Point2 center() const noexcept { return {x + 0.5 * w, y + 0.5 * h}; }

  /// w > 0, h > 0 and all coordinates finite.
  bool valid() const noexcept;

  static BBox from_corners(double x1, double y1, double x2, double y2) noexcept {
    return {x1, y1, x2 - x1, y2 - y1};
  }
  static BBox centered(Point2 c, double w, double h) noexcept {
    return {c.x - 0.5 * w, c.y - 0.5 * h, w, h};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

double intersection_area(const BBox& a, const BBox& b) noexcept;

/// Intersection over union; 0 when the boxes are disjoint.
double iou(const BBox& a, const BBox& b) noexcept;

/// Fraction of `inner` lying inside `region`: area(inner ∩ region) / area(inner).
double coverage(const BBox& inner, const BBox& region) noexcept;

/// Intersection box, or nullopt when the overlap has zero area.
std::optional<BBox> intersect(const BBox& a, const BBox& b) noexcept;

/// Smallest box containing both.
BBox union_box(const BBox& a, const BBox& b) noexcept;

bool contains(const BBox& region, const BBox& inner, double tol = 0.0) noexcept;

BBox image_box(const ImageDims& dims) noexcept;

/// Clip to the image extent; nullopt when nothing of the box remains.
std::optional<BBox> clamp_to_image(const BBox& b, const ImageDims& dims) noexcept;

/// Place a w_b x h_b window as close to `seed_center` as possible while keeping
/// it inside the image. An axis whose window extent is at least the image extent
/// spans the full axis instead.
BBox recenter(Point2 seed_center, double w_b, double h_b, const ImageDims& dims) noexcept;

}  // namespace aerodet
