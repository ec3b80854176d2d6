#include <gtest/gtest.h>

#include <random>

#include "aerodet/geometry.hpp"
#include "support/oracles.hpp"

using namespace aerodet;

TEST(Iou, IdenticalBoxes) { EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0); }

TEST(Iou, DisjointBoxes) { EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {20, 20, 5, 5}), 0.0); }

TEST(Iou, DiagonalOverlapMatchesPixelCount) {
  const BBox a{0, 0, 2, 2}, b{1, 1, 2, 2};
  EXPECT_NEAR(iou(a, b), 1.0 / 7.0, 1e-12);
  EXPECT_NEAR(iou(a, b), oracle::pixel_iou(a, b), 1e-12);
}

TEST(Iou, TouchingEdgesHaveZeroOverlap) { EXPECT_DOUBLE_EQ(iou({0, 0, 4, 4}, {4, 0, 4, 4}), 0.0); }

TEST(Coverage, ContainedIsOne) { EXPECT_DOUBLE_EQ(coverage({2, 2, 3, 3}, {0, 0, 10, 10}), 1.0); }

TEST(Coverage, Disjoint) { EXPECT_DOUBLE_EQ(coverage({0, 0, 3, 3}, {5, 5, 3, 3}), 0.0); }

TEST(Coverage, HalfInside) { EXPECT_DOUBLE_EQ(coverage({0, 0, 4, 4}, {2, 0, 4, 4}), 0.5); }

TEST(Coverage, EqualsIouForIdenticalBoxes) {
  const BBox a{3.5, 1.25, 7, 2};
  EXPECT_DOUBLE_EQ(coverage(a, a), iou(a, a));
}

TEST(Recenter, InteriorSeedKeepsCenter) {
  EXPECT_EQ(recenter({500, 400}, 400, 300, {1000, 800}), (BBox{300, 250, 400, 300}));
}

TEST(Recenter, CornerSeedIsClamped) {
  const BBox b = recenter({50, 50}, 400, 300, {1000, 800});
  EXPECT_EQ(b, (BBox{0, 0, 400, 300}));
  EXPECT_EQ(b.center(), (Point2{200, 150}));
}

TEST(Recenter, OversizedWindowSpansAxis) {
  EXPECT_EQ(recenter({500, 400}, 1200, 300, {1000, 800}), (BBox{0, 250, 1000, 300}));
}

TEST(Recenter, FarCornerIsClamped) {
  EXPECT_EQ(recenter({990, 790}, 400, 300, {1000, 800}), (BBox{600, 500, 400, 300}));
}

TEST(Geometry, ClampToImage) {
  const auto c = clamp_to_image({-5, 10, 20, 100}, {100, 50});
  ASSERT_TRUE(c);
  EXPECT_EQ(*c, (BBox{0, 10, 15, 40}));
  EXPECT_FALSE(clamp_to_image({200, 10, 5, 5}, {100, 50}));
}

TEST(Geometry, IntersectAndUnion) {
  const auto i = intersect({0, 0, 10, 10}, {5, 5, 10, 10});
  ASSERT_TRUE(i);
  EXPECT_EQ(*i, (BBox{5, 5, 5, 5}));
  EXPECT_FALSE(intersect({0, 0, 1, 1}, {1, 0, 1, 1}));
  EXPECT_EQ(union_box({0, 0, 10, 10}, {5, 5, 10, 10}), (BBox{0, 0, 15, 15}));
}

TEST(Geometry, Contains) {
  EXPECT_TRUE(contains({0, 0, 10, 10}, {0, 0, 10, 10}));
  EXPECT_FALSE(contains({0, 0, 10, 10}, {0, 0, 10.5, 10}));
  EXPECT_TRUE(contains({0, 0, 10, 10}, {0, 0, 10.5, 10}, 0.5));
}

TEST(GeometryProperty, RandomIntegerBoxesMatchPixelOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pos(0, 40), size(1, 25);
  for (int trial = 0; trial < 2000; ++trial) {
    const BBox a{double(pos(rng)), double(pos(rng)), double(size(rng)), double(size(rng))};
    const BBox b{double(pos(rng)), double(pos(rng)), double(size(rng)), double(size(rng))};
    ASSERT_NEAR(iou(a, b), oracle::pixel_iou(a, b), 1e-9);
    ASSERT_NEAR(coverage(a, b), oracle::pixel_coverage(a, b), 1e-9);
    ASSERT_DOUBLE_EQ(iou(a, b), iou(b, a));
    ASSERT_GE(iou(a, b), 0.0);
    ASSERT_LE(iou(a, b), 1.0);
    ASSERT_EQ(coverage(a, b) == 1.0, contains(b, a));
  }
}

TEST(GeometryProperty, RecenterStaysInsideAndKeepsFittingCenters) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const ImageDims dims{50 + u(rng) * 2000, 50 + u(rng) * 1500};
    const double w = 10 + u(rng) * 1200, h = 10 + u(rng) * 1200;
    const Point2 seed{u(rng) * dims.width, u(rng) * dims.height};
    const BBox b = recenter(seed, w, h, dims);
    ASSERT_TRUE(contains(image_box(dims), b, 1e-9));
    ASSERT_DOUBLE_EQ(b.w, std::min(w, dims.width));
    ASSERT_DOUBLE_EQ(b.h, std::min(h, dims.height));
    const bool fits_x = seed.x - w / 2 >= 0 && seed.x + w / 2 <= dims.width;
    const bool fits_y = seed.y - h / 2 >= 0 && seed.y + h / 2 <= dims.height;
    if (fits_x && fits_y) {
      ASSERT_NEAR(b.center().x, seed.x, 1e-9);
      ASSERT_NEAR(b.center().y, seed.y, 1e-9);
    }
  }
}
