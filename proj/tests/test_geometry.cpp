#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "muscdb/errors.hpp"
#include "muscdb/geometry.hpp"
#include "oracles.hpp"

using namespace muscdb;
constexpr double kPi = std::numbers::pi;

TEST_CASE("canonical box form") {
  const RotatedBox a = RotatedBox::make(5, 5, 2, 4, 0.0);
  CHECK(a.w == 4);
  CHECK(a.h == 2);
  CHECK(a.angle == doctest::Approx(-kPi / 2));
  CHECK(a.is_canonical());

  const RotatedBox b = RotatedBox::make(0, 0, 3, 1, kPi);
  CHECK(b.angle == doctest::Approx(0.0));
  const RotatedBox c = RotatedBox::make(0, 0, 3, 1, 3 * kPi / 4);
  CHECK(c.angle == doctest::Approx(-kPi / 4));

  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const RotatedBox r = oracle::random_box(rng);
    CHECK(r.is_canonical());
    CHECK(RotatedBox::make(r.cx, r.cy, r.w, r.h, r.angle) == r);
  }
}

TEST_CASE("invalid boxes are rejected") {
  CHECK_THROWS_AS(RotatedBox::make(0, 0, 0, 1, 0), Error);
  CHECK_THROWS_AS(RotatedBox::make(0, 0, 1, -1, 0), Error);
  CHECK_THROWS_AS(RotatedBox::make(NAN, 0, 1, 1, 0), Error);
  CHECK_THROWS_AS(RotatedBox::make(0, 0, 1, 1, INFINITY), Error);
  try {
    RotatedBox::make(0, 0, 0, 1, 0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_box);
  }
}

TEST_CASE("analytic iou cases") {
  const RotatedBox a = RotatedBox::make(0, 0, 2, 2, 0);
  CHECK(rotated_iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rotated_iou(a, RotatedBox::make(10, 10, 2, 2, 0)) == 0.0);
  // Unit square against itself rotated by 45 degrees: intersection is the
  // regular octagon of area 2(sqrt2 - 1), so IoU = 1/sqrt2.
  const RotatedBox r = RotatedBox::make(0, 0, 2, 2, kPi / 4);
  CHECK(std::abs(rotated_iou(a, r) - 1.0 / std::sqrt(2.0)) < 1e-9);
  // Half overlap of equal axis-aligned boxes.
  CHECK(rotated_iou(a, RotatedBox::make(1, 0, 2, 2, 0)) == doctest::Approx(1.0 / 3.0));
  // Touching edges only.
  CHECK(rotated_iou(a, RotatedBox::make(2, 0, 2, 2, 0)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("containment gives the area ratio") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (int i = 0; i < 500; ++i) {
    const RotatedBox outer = oracle::random_box(rng);
    const double s = u(rng);
    const RotatedBox inner = RotatedBox::make(outer.cx, outer.cy, outer.w * s, outer.h * s, outer.angle);
    CHECK(std::abs(rotated_iou(inner, outer) - inner.area() / outer.area()) < 1e-9);
  }
}

TEST_CASE("iou is symmetric, bounded and rotation invariant") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int i = 0; i < 100000; ++i) {
    const RotatedBox a = oracle::random_box(rng);
    const RotatedBox b = oracle::random_box(rng);
    const double ab = rotated_iou(a, b);
    REQUIRE(ab == rotated_iou(b, a));
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 1.0 + 1e-12);
    if (i % 20 == 0) {
      const double t = ang(rng);
      const Point pivot{50.0, 50.0};
      const double rot = rotated_iou(rotate_about(a, pivot, t), rotate_about(b, pivot, t));
      REQUIRE(std::abs(rot - ab) < 1e-9);
    }
  }
}

TEST_CASE("iou agrees with point sampling on a few pairs") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const RotatedBox a = oracle::random_box(rng, 40.0);
    const RotatedBox b = oracle::random_box(rng, 40.0);
    CHECK(std::abs(rotated_iou(a, b) - oracle::monte_carlo_iou(a, b, 250000, rng)) < 3e-3);
  }
}

TEST_CASE("large pixel coordinates stay accurate") {
  const RotatedBox a = RotatedBox::make(19990.5, 19990.25, 30, 10, 0.3);
  const RotatedBox b = RotatedBox::make(19995.5, 19991.25, 30, 10, 0.3);
  const RotatedBox a0 = RotatedBox::make(0.5, 0.25, 30, 10, 0.3);
  const RotatedBox b0 = RotatedBox::make(5.5, 1.25, 30, 10, 0.3);
  CHECK(std::abs(rotated_iou(a, b) - rotated_iou(a0, b0)) < 1e-9);
}

TEST_CASE("polygon clipping") {
  const ConvexPolygon sq({{0, 0}, {2, 0}, {2, 2}, {0, 2}});
  CHECK(sq.area() == doctest::Approx(4.0));
  const ConvexPolygon shifted({{1, 1}, {3, 1}, {3, 3}, {1, 3}});
  CHECK(intersection_area(sq, shifted) == doctest::Approx(1.0));
  const ConvexPolygon tri({{0, 0}, {2, 0}, {0, 2}});
  CHECK(intersection_area(sq, tri) == doctest::Approx(2.0));
  CHECK(intersection_area(sq, ConvexPolygon({{5, 5}, {6, 5}, {6, 6}})) == 0.0);
  CHECK(signed_area(sq.vertices()) > 0);
}

TEST_CASE("box corners are counterclockwise with the right area") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const RotatedBox b = oracle::random_box(rng);
    const auto corners = box_corners(b);
    CHECK(signed_area(corners) == doctest::Approx(b.area()).epsilon(1e-9));
  }
}

TEST_CASE("minimum area rectangle") {
  const std::vector<Point> square{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  const RotatedBox r = min_area_rect(square);
  CHECK(r.cx == doctest::Approx(1.0));
  CHECK(r.cy == doctest::Approx(1.0));
  CHECK(r.area() == doctest::Approx(4.0));

  std::mt19937_64 rng(9);
  for (int i = 0; i < 300; ++i) {
    const RotatedBox b = oracle::random_box(rng);
    const auto c = box_corners(b);
    const RotatedBox back = min_area_rect(std::vector<Point>(c.begin(), c.end()));
    CHECK(back.area() >= b.area() - 1e-6);
    CHECK(back.area() <= b.area() + 1e-6);
    CHECK(rotated_iou(back, b) == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK_THROWS_AS(min_area_rect(std::vector<Point>{{0, 0}, {1, 1}, {2, 2}}), Error);
}
