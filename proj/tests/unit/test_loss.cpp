#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "aerodet/error.hpp"
#include "aerodet/loss.hpp"
#include "support/oracles.hpp"

using namespace aerodet;

namespace {

DenseTargetSet single_cell(double y) {
  DenseTargetSet t;
  t.heatmap = DenseGrid(1, 1, 1, y);
  t.n_objects = 1;
  t.sizes = {{10, 20}};
  t.offsets = {{0.5, 0.5}};
  t.peak_cells = {{0, 0}};
  t.object_base_class = {1};
  return t;
}

// Direct evaluation of the focal loss, written from the formula.
double focal_reference(const DenseGrid& y, const DenseGrid& p_raw, std::size_t n, double a, double b, double eps) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::min(std::max(p_raw.data()[i], eps), 1 - eps);
    const double yy = y.data()[i];
    if (yy == 1.0) s += std::pow(1 - p, a) * std::log(p);
    else s += std::pow(1 - yy, b) * std::pow(p, a) * std::log(1 - p);
  }
  return n ? -s / static_cast<double>(n) : 0.0;
}

DenseTargetSet random_targets(std::mt19937_64& rng) {
  const LabelTree tree({{1, "a"}, {2, "b"}, {3, "c"}}, {{4, "parent"}}, {{1, 4}, {2, 4}});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageRecord rec{"r", {32, 32}, std::nullopt, {}};
  for (int k = 0; k < 3; ++k) {
    ObjectAnnotation a;
    a.bbox = BBox::centered({1 + u(rng) * 30, 1 + u(rng) * 30}, 2 + u(rng) * 12, 2 + u(rng) * 12);
    a.category = 1 + static_cast<int>(u(rng) * 3) % 3;
    rec.annotations.push_back(a);
  }
  return splat_targets(rec, tree, {});
}

}  // namespace

TEST(FocalLoss, PeakScalar) {
  const auto r = focal_loss_shm(single_cell(1.0), DenseGrid(1, 1, 1, 0.5), {});
  EXPECT_NEAR(r.value, 0.173287, 1e-6);
  EXPECT_NEAR(r.value, -0.25 * std::log(0.5), 1e-15);
}

TEST(FocalLoss, BackgroundScalar) {
  const auto r = focal_loss_shm(single_cell(0.5), DenseGrid(1, 1, 1, 0.5), {});
  EXPECT_NEAR(r.value, 0.010830, 1e-6);
  EXPECT_NEAR(r.value, -std::pow(0.5, 6) * std::log(0.5), 1e-15);
}

TEST(FocalLoss, NearPerfectPredictionIsNearZero) {
  std::mt19937_64 rng(51);
  const auto t = random_targets(rng);
  DenseGrid p(t.heatmap.width(), t.heatmap.height(), t.heatmap.channels());
  for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = t.heatmap.data()[i] == 1.0 ? 1 - 1e-4 : 1e-4;
  EXPECT_LE(focal_loss_shm(t, p, {}).value, 1e-3);
}

TEST(FocalLoss, EmptyTargetIsZero) {
  DenseTargetSet t;
  t.heatmap = DenseGrid(4, 4, 2);
  const auto r = focal_loss_shm(t, DenseGrid(4, 4, 2, 0.3), {});
  EXPECT_EQ(r.value, 0.0);
  for (double g : r.grad.data()) EXPECT_EQ(g, 0.0);
}

TEST(FocalLoss, ShapeMismatch) {
  EXPECT_THROW(focal_loss_shm(single_cell(1.0), DenseGrid(2, 1, 1, 0.5), {}), DataError);
}

TEST(FocalLoss, ClampedCellsHaveZeroGradientAndFiniteValue) {
  DenseTargetSet t = single_cell(1.0);
  for (double v : {0.0, -3.0, 1.0, 7.0}) {
    const auto r = focal_loss_shm(t, DenseGrid(1, 1, 1, v), {});
    EXPECT_TRUE(std::isfinite(r.value));
    EXPECT_EQ(r.grad.at(0, 0, 0), 0.0);
  }
}

TEST(FocalLoss, MonotoneInPrediction) {
  double prev_peak = 1e300, prev_bg = -1.0;
  for (double p = 0.01; p < 0.99; p += 0.01) {
    const double peak = focal_loss_shm(single_cell(1.0), DenseGrid(1, 1, 1, p), {}).value;
    const double bg = focal_loss_shm(single_cell(0.3), DenseGrid(1, 1, 1, p), {}).value;
    EXPECT_LT(peak, prev_peak);
    EXPECT_GT(bg, prev_bg);
    EXPECT_GE(peak, 0.0);
    prev_peak = peak;
    prev_bg = bg;
  }
}

TEST(FocalLossProperty, MatchesReferenceAndFiniteDifferences) {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  const LossConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = random_targets(rng);
    DenseGrid p(t.heatmap.width(), t.heatmap.height(), t.heatmap.channels());
    for (double& v : p.data()) v = u(rng);
    const auto r = focal_loss_shm(t, p, cfg);
    ASSERT_NEAR(r.value, focal_reference(t.heatmap, p, t.n_objects, 2, 4, 1e-4), 1e-12);
    DenseGrid probe = p;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double v0 = p.data()[i];
      const double numeric = oracle::central_difference(
          [&](double v) {
            probe.data()[i] = v;
            const double f = focal_reference(t.heatmap, probe, t.n_objects, 2, 4, 1e-4);
            probe.data()[i] = v0;
            return f;
          },
          v0, 1e-5);
      const double a = r.grad.data()[i];
      ASSERT_LE(std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}), 1e-4) << i;
    }
    ASSERT_LE(focal_grad_check(t, p, cfg), 1e-4);
  }
}

TEST(FocalLossProperty, StackedChannelsMatter) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_targets(rng);
    const DenseGrid perfect = ideal_prediction(t).heatmap;
    DenseGrid base_only = perfect;
    for (int y = 0; y < base_only.height(); ++y)
      for (int x = 0; x < base_only.width(); ++x) base_only.at(x, y, 3) = 0.0;
    // Any target with a child of the parent class writes a 1 into channel 3.
    bool has_parent = false;
    for (int c : t.object_base_class) has_parent = has_parent || c != 3;
    if (!has_parent) continue;
    ASSERT_GT(focal_loss_shm(t, base_only, {}).value, focal_loss_shm(t, perfect, {}).value);
  }
}

TEST(SizeLoss, Examples) {
  const auto t = single_cell(1.0);
  EXPECT_EQ(size_loss_wh(t, {{10, 20}}).value, 0.0);
  EXPECT_DOUBLE_EQ(size_loss_wh(t, {{12, 17}}).value, 5.0);
  EXPECT_DOUBLE_EQ(size_loss_wh(t, {{10 + 2 * 3.0, 20 - 3 * 3.0}}).value, 3 * 5.0);
  const auto g = size_loss_wh(t, {{12, 17}}).grad;
  EXPECT_EQ(g[0], (Point2{1.0, -1.0}));
  EXPECT_EQ(size_loss_wh(t, {{10, 20}}).grad[0], (Point2{0.0, 0.0}));
  EXPECT_THROW(size_loss_wh(t, {}), DataError);
}

TEST(OffsetLoss, Examples) {
  DenseTargetSet t = single_cell(1.0);
  t.n_objects = 2;
  t.offsets = {{0.25, 0.75}, {0.5, 0.5}};
  t.sizes.push_back({1, 1});
  EXPECT_EQ(offset_loss(t, t.offsets).value, 0.0);
  // Per-object errors 0.1 and 0.3.
  EXPECT_NEAR(offset_loss(t, {{0.35, 0.75}, {0.4, 0.3}}).value, 0.2, 1e-12);
}

TEST(TotalLoss, Examples) {
  const LossConfig cfg;
  EXPECT_DOUBLE_EQ(total_loss({1, 10, 0.5}, cfg), 2.5);
  EXPECT_EQ(total_loss({0, 0, 0}, cfg), 0.0);
  LossConfig twice = cfg;
  twice.lambda_wh *= 2;
  EXPECT_DOUBLE_EQ(total_loss({1, 10, 0.5}, twice) - total_loss({1, 10, 0.5}, cfg), cfg.lambda_wh * 10);
}

TEST(LossConfig, Validation) {
  LossConfig c;
  c.clamp_eps = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.alpha = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Prediction, IdealIsNearZeroAndRoundTrips) {
  std::mt19937_64 rng(54);
  const auto t = random_targets(rng);
  const auto ideal = ideal_prediction(t);
  const auto rep = evaluate_loss(t, ideal, {});
  EXPECT_LE(rep.total, 1e-3);
  EXPECT_EQ(rep.parts.wh, 0.0);
  EXPECT_EQ(rep.parts.off, 0.0);
  oracle::TempDir dir("pred");
  save_prediction(ideal, dir / "p.json");
  const auto back = load_prediction(dir / "p.json");
  EXPECT_EQ(back.heatmap, ideal.heatmap);
  EXPECT_EQ(back.sizes.size(), ideal.sizes.size());
}
