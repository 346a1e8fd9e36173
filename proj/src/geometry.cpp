#include "muscdb/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "muscdb/errors.hpp"

namespace muscdb {
namespace {

constexpr double kPi = std::numbers::pi;

double wrap_half_turn(double angle) {
  double a = angle - kPi * std::floor((angle + kPi / 2) / kPi);
  if (a >= kPi / 2) a -= kPi;
  if (a < -kPi / 2) a += kPi;
  return a;
}

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

void drop_near_duplicates(std::vector<Point>& pts) {
  if (pts.empty()) return;
  std::vector<Point> out;
  out.reserve(pts.size());
  for (const Point& p : pts) {
    if (out.empty() || distance(out.back(), p) >= kClipTolerance) out.push_back(p);
  }
  while (out.size() > 1 && distance(out.front(), out.back()) < kClipTolerance) {
    out.pop_back();
  }
  pts = std::move(out);
}

// Keeps the part of `subject` on the left of the directed edge p->q.
std::vector<Point> clip_half_plane(const std::vector<Point>& subject, Point p, Point q) {
  std::vector<Point> out;
  const double len = distance(p, q);
  if (len == 0.0) return subject;
  auto side = [&](Point v) { return cross(p, q, v) / len; };

  const std::size_t n = subject.size();
  out.reserve(n + 2);
  for (std::size_t i = 0; i < n; ++i) {
    const Point s = subject[(i + n - 1) % n];
    const Point e = subject[i];
    const double ds = side(s);
    const double de = side(e);
    const bool s_in = ds >= -kClipTolerance;
    const bool e_in = de >= -kClipTolerance;
    if (e_in) {
      if (!s_in) {
        const double t = std::clamp(ds / (ds - de), 0.0, 1.0);
        out.push_back({s.x + t * (e.x - s.x), s.y + t * (e.y - s.y)});
      }
      out.push_back(e);
    } else if (s_in) {
      const double t = std::clamp(ds / (ds - de), 0.0, 1.0);
      out.push_back({s.x + t * (e.x - s.x), s.y + t * (e.y - s.y)});
    }
  }
  drop_near_duplicates(out);
  return out;
}

bool box_key_less(const RotatedBox& a, const RotatedBox& b) {
  return std::tie(a.cx, a.cy, a.w, a.h, a.angle) < std::tie(b.cx, b.cy, b.w, b.h, b.angle);
}

}  // namespace

void validate_box(const RotatedBox& box) {
  const bool finite = std::isfinite(box.cx) && std::isfinite(box.cy) && std::isfinite(box.w) &&
                      std::isfinite(box.h) && std::isfinite(box.angle);
  if (!finite) throw Error(ErrorKind::invalid_box, "box has non-finite fields");
  if (!(box.w > 0.0) || !(box.h > 0.0)) {
    throw Error(ErrorKind::invalid_box, "box width and height must be positive");
  }
}

RotatedBox RotatedBox::make(double cx, double cy, double w, double h, double angle) {
  RotatedBox box{cx, cy, w, h, angle};
  validate_box(box);
  box.angle = wrap_half_turn(angle);
  if (box.h > box.w) {
    std::swap(box.w, box.h);
    box.angle = wrap_half_turn(box.angle + kPi / 2);
  }
  return box;
}

bool RotatedBox::is_canonical() const {
  return w >= h && angle >= -kPi / 2 && angle < kPi / 2;
}

ConvexPolygon::ConvexPolygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {}

double ConvexPolygon::area() const { return std::abs(signed_area(vertices_)); }

double signed_area(std::span<const Point> v) {
  if (v.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) twice += cross(v[0], v[i], v[i + 1]);
  return 0.5 * twice;
}

std::array<Point, 4> box_corners(const RotatedBox& box) {
  const double c = std::cos(box.angle);
  const double s = std::sin(box.angle);
  const double hw = box.w / 2;
  const double hh = box.h / 2;
  const std::array<Point, 4> local{{{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}};
  std::array<Point, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {box.cx + local[i].x * c - local[i].y * s, box.cy + local[i].x * s + local[i].y * c};
  }
  return out;
}

ConvexPolygon box_to_polygon(const RotatedBox& box) {
  validate_box(box);
  const auto corners = box_corners(box);
  return ConvexPolygon({corners.begin(), corners.end()});
}

double intersection_area(const ConvexPolygon& a, const ConvexPolygon& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::vector<Point> clipped(a.vertices().begin(), a.vertices().end());
  const auto clip = b.vertices();
  for (std::size_t i = 0; i < clip.size() && clipped.size() >= 3; ++i) {
    clipped = clip_half_plane(clipped, clip[i], clip[(i + 1) % clip.size()]);
  }
  if (clipped.size() < 3) return 0.0;
  const double area = signed_area(clipped);
  return area < kAreaSnap ? 0.0 : area;
}

double rotated_iou(const RotatedBox& a_in, const RotatedBox& b_in) {
  validate_box(a_in);
  validate_box(b_in);
  const bool swap = box_key_less(b_in, a_in);
  RotatedBox a = swap ? b_in : a_in;
  RotatedBox b = swap ? a_in : b_in;

  // Work in a frame centred on `a` so the shoelace sum stays well conditioned
  // at large pixel offsets.
  const double ox = a.cx;
  const double oy = a.cy;
  a.cx -= ox;
  a.cy -= oy;
  b.cx -= ox;
  b.cy -= oy;

  const double area_a = a.area();
  const double area_b = b.area();
  double inter = intersection_area(box_to_polygon(a), box_to_polygon(b));
  inter = std::min(inter, std::min(area_a, area_b));
  const double uni = area_a + area_b - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

RotatedBox rotate_about(const RotatedBox& box, Point pivot, double radians) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  const double dx = box.cx - pivot.x;
  const double dy = box.cy - pivot.y;
  return RotatedBox::make(pivot.x + dx * c - dy * s, pivot.y + dx * s + dy * c, box.w, box.h,
                          box.angle + radians);
}

std::vector<Point> convex_hull(std::span<const Point> points) {
  std::vector<Point> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return std::tie(a.x, a.y) < std::tie(b.x, b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

RotatedBox min_area_rect(std::span<const Point> points) {
  const auto hull = convex_hull(points);
  if (hull.size() < 3 || std::abs(signed_area(hull)) <= kAreaSnap) {
    throw Error(ErrorKind::invalid_polygon, "point set has zero area");
  }

  double best_area = INFINITY;
  RotatedBox best{};
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point p = hull[i];
    const Point q = hull[(i + 1) % hull.size()];
    const double len = distance(p, q);
    const Point u{(q.x - p.x) / len, (q.y - p.y) / len};
    const Point n{-u.y, u.x};
    double umin = INFINITY, umax = -INFINITY, nmin = INFINITY, nmax = -INFINITY;
    for (const Point& v : hull) {
      const double pu = v.x * u.x + v.y * u.y;
      const double pn = v.x * n.x + v.y * n.y;
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      nmin = std::min(nmin, pn);
      nmax = std::max(nmax, pn);
    }
    const double area = (umax - umin) * (nmax - nmin);
    if (area < best_area) {
      best_area = area;
      const double mu = (umin + umax) / 2;
      const double mn = (nmin + nmax) / 2;
      best = {u.x * mu + n.x * mn, u.y * mu + n.y * mn, umax - umin, nmax - nmin, std::atan2(u.y, u.x)};
    }
  }
  return RotatedBox::make(best.cx, best.cy, best.w, best.h, best.angle);
}

}  // namespace muscdb
