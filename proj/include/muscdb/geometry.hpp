#pragma once

#include <array>
#include <span>
#include <vector>

namespace muscdb {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

// Oriented rectangle in pixel coordinates, angle in radians (counterclockwise).
//
// Canonical form: w >= h and angle in [-pi/2, pi/2). make() maps any valid
// (w, h, angle) triple onto it by reducing the angle modulo pi and swapping
// w/h with a pi/2 shift when h > w. Squares keep their angle modulo pi.
struct RotatedBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;
  double angle = 0.0;

  // Throws Error{invalid_box} on non-finite fields or non-positive sizes.
  static RotatedBox make(double cx, double cy, double w, double h, double angle);

  double area() const { return w * h; }
  bool is_canonical() const;

  friend bool operator==(const RotatedBox&, const RotatedBox&) = default;
};

// Throws Error{invalid_box} unless all fields are finite and sizes positive.
void validate_box(const RotatedBox& box);

// Counterclockwise vertex list of a convex polygon.
class ConvexPolygon {
 public:
  ConvexPolygon() = default;
  explicit ConvexPolygon(std::vector<Point> vertices);

  std::span<const Point> vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  bool empty() const { return vertices_.size() < 3; }
  double area() const;

 private:
  std::vector<Point> vertices_;
};

// Signed shoelace area (positive for counterclockwise order).
double signed_area(std::span<const Point> vertices);

std::array<Point, 4> box_corners(const RotatedBox& box);
ConvexPolygon box_to_polygon(const RotatedBox& box);

// Area of the intersection of two convex polygons via successive half-plane
// clipping of `a` by each edge of `b`.
double intersection_area(const ConvexPolygon& a, const ConvexPolygon& b);

// Intersection over union of two rotated boxes; argument order does not
// affect the result bits.
double rotated_iou(const RotatedBox& a, const RotatedBox& b);

// Rotates the box about `pivot` by `radians` (counterclockwise).
RotatedBox rotate_about(const RotatedBox& box, Point pivot, double radians);

// Minimum-area enclosing rectangle of a point set (rotating calipers over the
// convex hull). Throws Error{invalid_polygon} on a degenerate hull.
RotatedBox min_area_rect(std::span<const Point> points);

std::vector<Point> convex_hull(std::span<const Point> points);

inline constexpr double kClipTolerance = 1e-9;
inline constexpr double kAreaSnap = 1e-12;

}  // namespace muscdb
