#include <gtest/gtest.h>

#include <random>

#include "aerodet/error.hpp"
#include "aerodet/nmm.hpp"
#include "aerodet/refine.hpp"
#include "support/oracles.hpp"

using namespace aerodet;

namespace {

std::vector<ClusterCandidate> fixture_candidates() {
  const auto images = load_cluster_json(oracle::fixture("refine_dense.json"));
  std::vector<ClusterCandidate> out;
  for (std::size_t i = 0; i < images.at(0).clusters.size(); ++i)
    out.push_back({images[0].clusters[i].window, images[0].scores.at(i)});
  return out;
}

std::vector<ClusterCandidate> random_candidates(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ClusterCandidate> out;
  for (int i = 0; i < n; ++i) {
    // Coarse score grid so ties occur.
    out.push_back({{std::floor(u(rng) * 40) * 25, std::floor(u(rng) * 20) * 25, 512, 512},
                   std::round(u(rng) * 20) / 20});
  }
  return out;
}

}  // namespace

TEST(TakeTopk, FewerThanK) {
  const std::vector<ClusterCandidate> c{{{0, 0, 1, 1}, 0.1}, {{1, 0, 1, 1}, 0.3}, {{2, 0, 1, 1}, 0.2}};
  EXPECT_EQ(take_topk(c, 10).size(), 3u);
}

TEST(TakeTopk, Ordering) {
  const std::vector<ClusterCandidate> c{{{0, 0, 1, 1}, 0.9}, {{1, 0, 1, 1}, 0.1}, {{2, 0, 1, 1}, 0.5}};
  const auto t = take_topk(c, 2);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0], c[0]);
  EXPECT_EQ(t[1], c[2]);
}

TEST(TakeTopk, EqualScoresKeepInputPrefix) {
  std::vector<ClusterCandidate> c;
  for (int i = 0; i < 6; ++i) c.push_back({{double(i), 0, 1, 1}, 0.5});
  const auto t = take_topk(c, 3);
  EXPECT_EQ(t, (std::vector<ClusterCandidate>{c[0], c[1], c[2]}));
  EXPECT_THROW(take_topk(c, 0), ConfigError);
}

TEST(PositionRefinement, IdenticalWindowsKeepOne) {
  std::vector<ClusterCandidate> c(10, {{100, 100, 512, 512}, 0.7});
  c[3].score = 0.8;
  const auto kept = position_refinement(c, 0.5);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_DOUBLE_EQ(kept[0].score, 0.8);
}

TEST(PositionRefinement, DisjointWindowsAllKept) {
  std::vector<ClusterCandidate> c;
  for (int i = 0; i < 10; ++i) c.push_back({{i * 600.0, 0, 512, 512}, 0.1 * i});
  const auto kept = position_refinement(c, 0.5);
  ASSERT_EQ(kept.size(), 10u);
  for (std::size_t i = 1; i < kept.size(); ++i) EXPECT_GE(kept[i - 1].score, kept[i].score);
}

TEST(PositionRefinement, DenseFixtureTenToFive) {
  const auto c = fixture_candidates();
  ASSERT_EQ(c.size(), 10u);
  const auto kept = position_refinement(take_topk(c, 10), RefineConfig{}.pr_overlap);
  ASSERT_EQ(kept.size(), 5u);
  // The higher-scored window of each pair survives.
  for (const auto& k : kept) EXPECT_GE(k.score, 0.80);
}

TEST(PositionRefinement, KFlagLimitsInput) {
  const auto c = fixture_candidates();
  const auto top4 = take_topk(c, 4);
  ASSERT_EQ(top4.size(), 4u);
  EXPECT_EQ(position_refinement(top4, 0.5).size(), 4u);
}

TEST(RefineConfig, Validation) {
  RefineConfig c;
  c.pr_overlap = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.k = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(RefineConfig{}.validate());
}

TEST(PositionRefinementProperty, SubsetPairwiseIdempotentMonotone) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const double t = (trial % 5) * 0.2;
    const auto cands = random_candidates(rng, 1 + trial % 30);
    const auto kept = position_refinement(cands, t);
    for (const auto& k : kept) ASSERT_NE(std::find(cands.begin(), cands.end(), k), cands.end());
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j) ASSERT_LE(iou(kept[i].window, kept[j].window), t);
    ASSERT_EQ(position_refinement(kept, t), kept);

    // Appending strictly lower-scored candidates keeps the original survivors.
    auto more = cands;
    for (auto extra : random_candidates(rng, 10)) {
      extra.score = -1.0 - extra.score;
      more.push_back(extra);
    }
    const auto kept_more = position_refinement(more, t);
    ASSERT_GE(kept_more.size(), kept.size());
    ASSERT_TRUE(std::equal(kept.begin(), kept.end(), kept_more.begin()));
  }
}
