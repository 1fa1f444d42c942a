#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ownerrel/error.hpp"
#include "ownerrel/geometry.hpp"
#include "test_support.hpp"

using namespace ownerrel;
using ownerrel::test::box;
using ownerrel::test::expect_error;

TEST(NormalizedDistance, CoincidentCentersIsZero) {
  const auto a = box(10, 10, 30, 30);
  const auto b = box(0, 0, 40, 40);
  EXPECT_EQ(normalized_distance(a, b, 100, 100), 0.0);
}

TEST(NormalizedDistance, ThreeFourFive) {
  // Δx/w = 0.3, Δy/h = 0.4
  const auto a = box(0, 0, 20, 20);
  const auto b = box(30, 80, 50, 100);
  EXPECT_EQ(normalized_distance(a, b, 100, 200), 0.5);
  EXPECT_EQ(normalized_distance(b, a, 100, 200), 0.5);
}

TEST(NormalizedDistance, SymmetricAndTranslationInvariant) {
  ownerrel::test::BoxSampler sampler(101);
  for (int i = 0; i < 200; ++i) {
    const auto a = sampler.next(640, 480);
    const auto b = sampler.next(640, 480);
    const double d = normalized_distance(a, b, 640, 480);
    EXPECT_EQ(d, normalized_distance(b, a, 640, 480));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, std::sqrt(2.0));
    auto shift = [](BoundingBox x) {
      x.x_min += 7.0;
      x.x_max += 7.0;
      x.y_min -= 3.0;
      x.y_max -= 3.0;
      return x;
    };
    EXPECT_NEAR(normalized_distance(shift(a), shift(b), 640, 480), d, 1e-12);
  }
}

TEST(NormalizedDistance, RejectsNonPositiveDimensions) {
  const auto a = box(0, 0, 1, 1);
  expect_error(ErrorCode::kInvalidDimension, [&] { normalized_distance(a, a, 0, 10); });
  expect_error(ErrorCode::kInvalidDimension, [&] { normalized_distance(a, a, 10, -1); });
}

TEST(DistanceRatio, Examples) {
  // normalized W_B = 0.10, H_B = 0.15 in a 200×100 frame
  const auto b = box(0, 0, 20, 15);
  EXPECT_EQ(distance_ratio(0.0, b, 200, 100), 0.0);
  EXPECT_NEAR(distance_ratio(0.5, b, 200, 100), 4.0, 1e-12);
  EXPECT_NEAR(distance_ratio(1.0, b, 200, 100), 2.0 * distance_ratio(0.5, b, 200, 100), 1e-12);
}

TEST(DistanceRatio, RejectsDegenerateBox) {
  const auto flat = box(5, 5, 5, 5);
  expect_error(ErrorCode::kInvalidBox, [&] { distance_ratio(0.1, flat, 100, 100); });
}

TEST(DistanceRatio, InvariantUnderSceneRescale) {
  ownerrel::test::BoxSampler sampler(7);
  for (int i = 0; i < 100; ++i) {
    const auto a = sampler.next(1280, 720);
    const auto b = sampler.next(1280, 720);
    const double r = distance_ratio(normalized_distance(a, b, 1280, 720), b, 1280, 720);
    for (double s : {0.5, 2.0, 10.0}) {
      auto scale = [s](BoundingBox x) {
        x.x_min *= s;
        x.x_max *= s;
        x.y_min *= s;
        x.y_max *= s;
        return x;
      };
      const double rs = distance_ratio(normalized_distance(scale(a), scale(b), 1280 * s, 720 * s), scale(b),
                                       1280 * s, 720 * s);
      EXPECT_NEAR(rs, r, 1e-12);
    }
  }
}

TEST(LogRatio, Examples) {
  EXPECT_EQ(log_ratio(1.0), 0.0);
  EXPECT_NEAR(log_ratio(std::numbers::e), 1.0, 1e-15);
  for (double a : {0.1, 0.7, 3.0, 12.5}) {
    for (double b : {0.2, 1.9, 44.0}) EXPECT_NEAR(log_ratio(a * b), log_ratio(a) + log_ratio(b), 1e-12);
  }
}

TEST(LogRatio, RejectsNonPositive) {
  expect_error(ErrorCode::kDomain, [] { log_ratio(0.0); });
  expect_error(ErrorCode::kDomain, [] { log_ratio(-2.0); });
}

// Area oracle: count unit cells on an integer grid.
namespace {
double grid_area(const BoundingBox& a, const BoundingBox& b, bool both) {
  double n = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      const bool in_a = cx > a.x_min && cx < a.x_max && cy > a.y_min && cy < a.y_max;
      const bool in_b = cx > b.x_min && cx < b.x_max && cy > b.y_min && cy < b.y_max;
      n += both ? (in_a && in_b) : (in_a || in_b);
    }
  }
  return n;
}
}  // namespace

TEST(Iou, Examples) {
  const auto a = box(0, 0, 1, 1);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, box(2, 2, 3, 3)), 0.0);
  EXPECT_NEAR(iou(a, box(0.5, 0, 1.5, 1)), 1.0 / 3.0, 1e-15);
}

TEST(Iou, MatchesGridOracle) {
  ownerrel::test::Lcg lcg(3);
  for (int i = 0; i < 300; ++i) {
    const auto a = ownerrel::test::integer_box(lcg, 64);
    const auto b = ownerrel::test::integer_box(lcg, 64);
    const double inter = grid_area(a, b, true);
    const double uni = grid_area(a, b, false);
    EXPECT_NEAR(intersection_area(a, b), inter, 1e-9);
    EXPECT_NEAR(iou(a, b), inter / uni, 1e-12);
    EXPECT_EQ(iou(a, b), iou(b, a));
    EXPECT_EQ(iou(a, b) == 0.0, inter == 0.0);
  }
}

TEST(Containment, Examples) {
  const auto outer = box(0, 0, 10, 10);
  EXPECT_EQ(containment(box(2, 2, 4, 4), outer), 1.0);
  EXPECT_EQ(containment(box(20, 20, 24, 24), outer), 0.0);
  EXPECT_NEAR(containment(box(8, 2, 12, 4), outer), 0.5, 1e-15);
}

TEST(Containment, MatchesGridOracle) {
  ownerrel::test::Lcg lcg(5);
  for (int i = 0; i < 300; ++i) {
    const auto a = ownerrel::test::integer_box(lcg, 64);
    const auto b = ownerrel::test::integer_box(lcg, 64);
    const double c = containment(a, b);
    EXPECT_NEAR(c, grid_area(a, b, true) / a.area(), 1e-12);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(RearFront, LargerXCenterIsRear) {
  auto a = box(10, 0, 20, 10, ObjectClass::kWheel, 1);
  auto b = box(50, 0, 60, 10, ObjectClass::kWheel, 2);
  EXPECT_EQ(rear_front(a, b).first, &b);
  EXPECT_EQ(rear_front(b, a).first, &b);
  auto c = box(50, 5, 60, 15, ObjectClass::kWheel, 0);
  EXPECT_EQ(rear_front(b, c).first, &b);  // tie → larger id
}

TEST(Scene, ValidateRejectsBrokenInvariants) {
  Scene s = ownerrel::test::two_wheel_scene();
  EXPECT_NO_THROW(s.validate());

  Scene bad_box = s;
  bad_box.boxes[0].x_max = bad_box.boxes[0].x_min;
  expect_error(ErrorCode::kInvalidBox, [&] { bad_box.validate(); });

  Scene outside = s;
  outside.boxes[1].x_max = s.width + 1;
  expect_error(ErrorCode::kInvalidBox, [&] { outside.validate(); });

  Scene wrong_class = s;
  wrong_class.gt_wheel_vehicle[1] = 2;  // wheel -> wheel
  expect_error(ErrorCode::kLookup, [&] { wrong_class.validate(); });

  Scene zero = s;
  zero.width = 0;
  expect_error(ErrorCode::kInvalidDimension, [&] { zero.validate(); });
}
